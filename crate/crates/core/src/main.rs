fn main() {
    std::process::exit(scoreflow::cli::run(std::env::args_os()));
}
