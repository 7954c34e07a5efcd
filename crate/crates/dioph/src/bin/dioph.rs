fn main() {
    std::process::exit(dioph::cli::main_with_args(std::env::args_os()));
}
