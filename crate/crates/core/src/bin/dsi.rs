fn main() {
    std::process::exit(dsi_gibbs::cli::main());
}
