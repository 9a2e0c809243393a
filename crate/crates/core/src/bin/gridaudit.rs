use std::io::IsTerminal;

fn main() {
    let stdout = std::io::stdout();
    let is_tty = stdout.is_terminal();
    let code = gridaudit::cli::run(
        std::env::args_os(),
        is_tty,
        &mut stdout.lock(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
