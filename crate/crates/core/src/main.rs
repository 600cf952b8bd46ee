fn main() {
    std::process::exit(uncertainty_lab::cli::main_with_args(std::env::args_os()));
}
