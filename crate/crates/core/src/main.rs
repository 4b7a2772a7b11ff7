fn main() {
    std::process::exit(langmuir::cli::main_with_args(std::env::args_os()));
}
