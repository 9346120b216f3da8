fn main() {
    std::process::exit(lbmforge::harness::cli::main_with_args(std::env::args_os()));
}
