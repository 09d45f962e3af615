fn main() {
    std::process::exit(ctrw_core::cli::main_entry());
}
