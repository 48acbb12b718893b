fn main() {
    std::process::exit(hematch::cli::main_with_args(std::env::args_os()));
}
