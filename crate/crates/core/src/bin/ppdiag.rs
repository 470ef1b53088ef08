fn main() {
    std::process::exit(ppdiag::cli::run_from(std::env::args_os()));
}
