fn main() {
    std::process::exit(infmeasure::cli::run(std::env::args_os()));
}
