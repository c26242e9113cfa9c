use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mut stdout = std::io::stdout();
    let code = memgrid::cli::run(&args, &mut stdout);
    let _ = stdout.flush();
    std::process::exit(code);
}
