fn main() {
    std::process::exit(cts_forge::cli::run(std::env::args_os()));
}
