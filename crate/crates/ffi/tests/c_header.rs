//! Compiles a C program against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "ndstab.h"

int main(int argc, char **argv) {
    FILE *f = fopen(argv[1], "rb");
    if (!f) return 10;
    static char json[65536];
    size_t n = fread(json, 1, sizeof json - 1, f);
    fclose(f);
    json[n] = 0;

    NdstabSpec *spec = NULL;
    if (ndstab_spec_from_json(json, &spec) != NDSTAB_STATUS_OK) return 11;
    if (ndstab_spec_validate(spec, 1000) != NDSTAB_STATUS_OK) return 12;

    NdstabSummary s;
    if (ndstab_spec_summary(spec, 1000, &s) != NDSTAB_STATUS_OK) return 13;
    NdstabInterval i;
    if (ndstab_alpha_interval_theorem1(&s, &i) != NDSTAB_STATUS_OK) return 14;
    if (fabs(i.upper - 0.35 * exp(1.0)) > 1e-12 || !i.lower_open || i.upper_open) return 15;

    char *report = NULL;
    if (ndstab_check_json(spec, NAN, 1000, &report) != NDSTAB_STATUS_OK) return 16;
    if (!strstr(report, "\"corollary3\"")) return 17;
    ndstab_string_free(report);

    NdstabHistory h = { NDSTAB_HISTORY_KIND_CONSTANT, 1.0, 0 };
    NdstabTrajectory *traj = NULL;
    if (ndstab_simulate(spec, h, 1.0, 1e-3, &traj) != NDSTAB_STATUS_OK) return 18;
    if (ndstab_trajectory_len(traj) != 1001) return 19;
    printf("x(1) = %.6f\n", ndstab_trajectory_x(traj)[1000]);
    ndstab_trajectory_free(traj);

    if (ndstab_spec_from_json("{", &spec) != NDSTAB_STATUS_PARSE_ERROR) return 20;
    if (!ndstab_last_error_message()) return 21;
    ndstab_spec_free(spec);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libndstab_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "compile failed");
    let out = Command::new(&exe)
        .arg(crate_dir.join("../core/corpus/eq15.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("x(1) = "));
}
