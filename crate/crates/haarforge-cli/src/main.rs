fn main() {
    std::process::exit(haarforge_cli::run(std::env::args_os()));
}
