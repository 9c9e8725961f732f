use std::io;

use clap::Parser;
use memrex_cli::{execute, Cli};

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    execute(cli, io::stdin().lock(), &mut io::stdout().lock())
}
