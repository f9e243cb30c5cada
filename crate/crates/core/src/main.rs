fn main() {
    std::process::exit(kidney_exchange::cli::run(std::env::args_os()));
}
