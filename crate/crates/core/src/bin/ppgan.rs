fn main() {
    std::process::exit(ppgan_core::cli::run());
}
