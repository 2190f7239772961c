fn main() {
    std::process::exit(crystal_flow::run());
}
