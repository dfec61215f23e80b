fn main() {
    std::process::exit(splatworld::cli::run(std::env::args_os()));
}
