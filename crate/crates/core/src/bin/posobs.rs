fn main() {
    std::process::exit(posobs::cli::main_with_args(std::env::args_os()));
}
