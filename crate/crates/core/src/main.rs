fn main() {
    std::process::exit(livsic::cli::run(std::env::args_os()));
}
