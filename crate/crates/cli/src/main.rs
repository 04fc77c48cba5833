use clap::Parser;

fn main() -> anyhow::Result<()> {
    gramdp_cli::cli::run(gramdp_cli::cli::Cli::parse())
}
