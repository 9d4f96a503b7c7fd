use clap::Parser;

fn main() {
    let cli = pic_cli::Cli::parse();
    let code = pic_cli::run(
        cli,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
