fn main() {
    erheo::cli::main();
}
