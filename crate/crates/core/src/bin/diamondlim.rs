fn main() {
    std::process::exit(diamondlim::cli::main_entry());
}
