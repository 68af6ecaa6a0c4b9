fn main() {
    std::process::exit(pdm_core::cli::main_with_args(std::env::args_os()));
}
