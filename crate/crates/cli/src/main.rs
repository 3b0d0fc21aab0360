fn main() {
    std::process::exit(sarf_cli::run(std::env::args_os()));
}
