fn main() {
    std::process::exit(qkdsim::cli::main_with_args(std::env::args_os()));
}
