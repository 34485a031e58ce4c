//! Reference permanent oracle speaking the line protocol on stdin/stdout.

fn main() -> std::io::Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    spoofsim_core::oracle::serve_exact(stdin.lock(), stdout.lock())
}
