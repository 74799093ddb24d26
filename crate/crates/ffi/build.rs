use std::env;
use std::path::PathBuf;

use cbindgen::{Config, EnumConfig, Language, RenameRule};

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");

    let config = Config {
        language: Language::C,
        include_guard: Some("KUBGEN_H".into()),
        cpp_compat: true,
        sys_includes: vec!["stdbool.h".into(), "stddef.h".into(), "stdint.h".into()],
        no_includes: true,
        documentation: true,
        enumeration: EnumConfig { rename_variants: RenameRule::ScreamingSnakeCase, prefix_with_name: true, ..Default::default() },
        ..Default::default()
    };
    cbindgen::generate_with_config(&crate_dir, config)
        .expect("unable to generate kubgen.h")
        .write_to_file(crate_dir.join("include").join("kubgen.h"));
}
