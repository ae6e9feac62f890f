//! Verifies the generated C header actually compiles as C.

use std::io::Write;
use std::path::Path;
use std::process::Command;

#[test]
fn header_compiles_as_c99() {
    let include_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = include_dir.join("fwguide.h");
    assert!(header.exists(), "build script generates include/fwguide.h");

    let cc = ["cc", "gcc", "clang"]
        .iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok());
    let Some(cc) = cc else {
        eprintln!("no C compiler on PATH; skipping header syntax check");
        return;
    };

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("consume.c");
    let mut f = std::fs::File::create(&src).unwrap();
    writeln!(
        f,
        "#include \"fwguide.h\"\n\
         int main(void) {{\n\
             FwgScenario *sc = 0;\n\
             FwgSample sample;\n\
             FwgStatus st = FWG_STATUS_OK;\n\
             (void)sc; (void)sample; (void)st;\n\
             (void)fwg_version;\n\
             (void)fwg_simulate;\n\
             (void)fwg_trajectory_sample;\n\
             return 0;\n\
         }}"
    )
    .unwrap();
    drop(f);

    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&include_dir)
        .arg(&src)
        .output()
        .expect("compiler runs");
    assert!(
        out.status.success(),
        "header failed to compile:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
