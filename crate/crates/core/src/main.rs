fn main() {
    std::process::exit(pmqkd::cli::main_with_args(std::env::args_os()));
}
