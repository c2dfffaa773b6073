fn main() {
    std::process::exit(bjj::cli::main_with_args(std::env::args_os()));
}
