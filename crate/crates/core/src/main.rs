fn main() {
    std::process::exit(camlab::cli::run(std::env::args_os()));
}
