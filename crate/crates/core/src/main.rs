fn main() {
    std::process::exit(sho_spectra::cli::main_with_args(std::env::args_os()));
}
