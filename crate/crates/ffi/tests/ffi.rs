//! Exercises the C ABI through the exported symbols, the way a foreign
//! caller would: episode loading, metric queries, manifest inspection, and
//! stage execution with error-code mapping.

use std::ffi::{CStr, CString};
use std::path::Path;

use demoforge_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn write_episode(path: &Path) {
    use demoforge::episode::{save_episode, Episode, Source};
    use demoforge::mat::Mat;
    let t = 24;
    let episode = Episode {
        episode_id: "ffi-ep".into(),
        task_id: "pick_place-00001".into(),
        instruction: "place the disc on the target pad".into(),
        dt: 0.05,
        dims: 2,
        source: Source::GeneratedExpert,
        states: Mat::from_fn(t, 2, |i, j| (i as f64 * 0.1) + j as f64),
        actions: Mat::zeros(t, 2),
    };
    save_episode(path, &episode).unwrap();
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(df_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn episode_round_trip_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ep.json");
    write_episode(&path);

    let mut handle: *mut DfEpisode = std::ptr::null_mut();
    let path_c = c(path.to_str().unwrap());
    unsafe {
        assert_eq!(df_episode_load(path_c.as_ptr(), &mut handle), DfStatus::Ok);
        assert!(!handle.is_null());

        let mut len = 0usize;
        assert_eq!(df_episode_len(handle, &mut len), DfStatus::Ok);
        assert_eq!(len, 24);
        let mut dims = 0usize;
        assert_eq!(df_episode_dims(handle, &mut dims), DfStatus::Ok);
        assert_eq!(dims, 2);

        let mut id: *mut std::ffi::c_char = std::ptr::null_mut();
        assert_eq!(df_episode_id(handle, &mut id), DfStatus::Ok);
        assert_eq!(CStr::from_ptr(id).to_str().unwrap(), "ffi-ep");
        df_string_free(id);

        // identity normalization on dim ranges
        let min = [0.0, 1.0];
        let max = [2.3, 3.3];
        let mut s = DfSmoothness {
            a_ep: -1.0,
            j_ep: -1.0,
            coverage: -1.0,
        };
        assert_eq!(
            df_episode_smoothness(handle, min.as_ptr(), max.as_ptr(), 2, &mut s),
            DfStatus::Ok
        );
        // linear states: zero acceleration/jerk, positive coverage
        assert!(s.a_ep.abs() < 1e-9);
        assert!(s.j_ep.abs() < 1e-9);
        assert!(s.coverage > 0.0);

        let mut s2 = s;
        assert_eq!(df_episode_smoothness_self(handle, &mut s2), DfStatus::Ok);
        assert!(s2.a_ep.abs() < 1e-9);

        df_episode_free(handle);
    }
}

#[test]
fn missing_file_reports_error_with_message() {
    let mut handle: *mut DfEpisode = std::ptr::null_mut();
    let path = c("/nonexistent/episode.json");
    let status = unsafe { df_episode_load(path.as_ptr(), &mut handle) };
    assert_eq!(status, DfStatus::Io);
    let msg = df_last_error_message();
    assert!(!msg.is_null());
    let text = unsafe { CStr::from_ptr(msg) }.to_str().unwrap().to_string();
    assert!(text.contains("nonexistent"), "{text}");
    unsafe { df_string_free(msg) };
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert_eq!(
            df_episode_load(std::ptr::null(), &mut std::ptr::null_mut()),
            DfStatus::NullPointer
        );
        assert_eq!(df_episode_len(std::ptr::null(), &mut 0), DfStatus::NullPointer);
        // freeing NULL handles and strings is a no-op
        df_episode_free(std::ptr::null_mut());
        df_manifest_free(std::ptr::null_mut());
        df_string_free(std::ptr::null_mut());
    }
}

#[test]
fn pipeline_stages_run_through_the_abi() {
    use demoforge::pipeline::PipelineConfig;
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    let mut cfg = PipelineConfig::mini();
    for group in &mut cfg.corpus.groups {
        group.count = 2;
    }
    cfg.save(&config_path).unwrap();
    let workdir = dir.path().join("run");

    let config_c = c(config_path.to_str().unwrap());
    let workdir_c = c(workdir.to_str().unwrap());

    unsafe {
        // stage order violation surfaces as StageOrder
        let curate = c("curate");
        assert_eq!(
            df_run_stage(
                config_c.as_ptr(),
                workdir_c.as_ptr(),
                curate.as_ptr(),
                0,
                std::ptr::null_mut()
            ),
            DfStatus::Io // no manifest yet: loading it fails with Io
        );

        let gen = c("gen-corpus");
        let mut summary: *mut std::ffi::c_char = std::ptr::null_mut();
        assert_eq!(
            df_run_stage(
                config_c.as_ptr(),
                workdir_c.as_ptr(),
                gen.as_ptr(),
                0,
                &mut summary
            ),
            DfStatus::Ok
        );
        let text = CStr::from_ptr(summary).to_str().unwrap().to_string();
        assert!(text.contains("8 episodes"), "{text}");
        df_string_free(summary);

        // pretrain before curate violates stage order
        let pretrain = c("pretrain");
        assert_eq!(
            df_run_stage(
                config_c.as_ptr(),
                workdir_c.as_ptr(),
                pretrain.as_ptr(),
                0,
                std::ptr::null_mut()
            ),
            DfStatus::StageOrder
        );

        assert_eq!(
            df_run_stage(
                config_c.as_ptr(),
                workdir_c.as_ptr(),
                curate.as_ptr(),
                0,
                std::ptr::null_mut()
            ),
            DfStatus::Ok
        );

        // manifest is now inspectable
        let manifest_path = c(workdir.join("manifest.json").to_str().unwrap());
        let mut manifest: *mut DfManifest = std::ptr::null_mut();
        assert_eq!(
            df_manifest_load(manifest_path.as_ptr(), &mut manifest),
            DfStatus::Ok
        );
        let mut n = 0usize;
        assert_eq!(df_manifest_len(manifest, &mut n), DfStatus::Ok);
        assert_eq!(n, 8);

        let mut q = DfQuality {
            a_ep: 0.0,
            j_ep: 0.0,
            coverage: 0.0,
            episode_score: 0.0,
            in_prescreen: 0,
            replay_success: 0,
            collision_free: 0,
            in_high_quality: 0,
            clip_count: 0,
        };
        assert_eq!(df_manifest_quality(manifest, 0, &mut q), DfStatus::Ok);
        assert!(q.a_ep.is_finite());
        assert!(q.coverage > 0.0);
        assert_eq!(q.clip_count, 0); // scoring has not run

        let mut id: *mut std::ffi::c_char = std::ptr::null_mut();
        assert_eq!(df_manifest_episode_id(manifest, 0, &mut id), DfStatus::Ok);
        assert!(CStr::from_ptr(id).to_str().unwrap().starts_with("clean-"));
        df_string_free(id);

        assert_eq!(
            df_manifest_quality(manifest, 99, &mut q),
            DfStatus::InvalidArgument
        );
        df_manifest_free(manifest);

        // unknown stage name
        let bogus = c("not-a-stage");
        assert_eq!(
            df_run_stage(
                config_c.as_ptr(),
                workdir_c.as_ptr(),
                bogus.as_ptr(),
                0,
                std::ptr::null_mut()
            ),
            DfStatus::InvalidArgument
        );
    }
}

#[test]
fn generated_header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/demoforge.h");
    assert!(header.is_file(), "header not generated");
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .status()
        .expect("cc available");
    assert!(status.success(), "header failed C99 syntax check");
}
