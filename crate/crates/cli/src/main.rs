fn main() {
    std::process::exit(sar2rgb_cli::run(std::env::args_os()));
}
