fn main() {
    std::process::exit(nesgd::cli::main_entry(std::env::args_os()));
}
