use clap::Parser;

fn main() {
    let cli = catindex::cli::Cli::parse();
    std::process::exit(catindex::cli::run(cli));
}
