fn main() {
    std::process::exit(vropt::harness::cli::run(std::env::args_os()));
}
