fn main() {
    std::process::exit(vrsim::cli::main_with_args(std::env::args_os()));
}
