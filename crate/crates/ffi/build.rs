fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(cbindgen::Config {
            language: cbindgen::Language::C,
            cpp_compat: true,
            include_guard: Some("DEMOFORGE_H".into()),
            include_version: true,
            documentation: true,
            documentation_style: cbindgen::DocumentationStyle::C99,
            enumeration: cbindgen::EnumConfig {
                prefix_with_name: true,
                ..Default::default()
            },
            ..Default::default()
        })
        .generate()
        .expect("unable to generate C bindings")
        .write_to_file(format!("{crate_dir}/include/demoforge.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
}
