fn main() {
    std::process::exit(hwarp::cli::main_with_args(std::env::args_os()));
}
