fn main() {
    std::process::exit(prosim::cli::run(std::env::args_os()));
}
