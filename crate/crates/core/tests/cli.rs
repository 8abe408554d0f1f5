use std::path::{Path, PathBuf};

use laglift::cli::run;
use laglift::graph::{graph_metrics, parse_dep_tree, render_tree, resolve_graph, restore_edges, GraphMetrics, RootManifest};
use laglift::planner::{Mode, UpgradePlan};
use laglift::registry::RegistryIndex;
use tempfile::TempDir;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn laglift(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("laglift").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

struct Bundle {
    dir: TempDir,
}

impl Bundle {
    fn generate(seed: u64) -> Bundle {
        let dir = tempfile::tempdir().unwrap();
        let seed = seed.to_string();
        let out = laglift(&["gen", "--seed", &seed, "--packages", "9", "--output", dir.path().to_str().unwrap()]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        Bundle { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }

    fn write(&self, name: &str, text: &str) -> String {
        std::fs::write(self.dir.path().join(name), text).unwrap();
        self.path(name)
    }
}

fn plan_args(b: &Bundle) -> Vec<String> {
    ["plan", "--registry", &b.path("registry.json"), "--manifest", &b.path("manifest.json"), "--usage", &b.path("usage.json")]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn plan_prints_json_plan() {
    let b = Bundle::generate(3);
    let mut args = plan_args(&b);
    args.extend(["--format".into(), "json".into()]);
    let out = laglift(&refs(&args));
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stderr.is_empty());
    let plan = UpgradePlan::from_json(&out.stdout).unwrap();
    assert_eq!(plan.mode, Mode::Lagease);
}

#[test]
fn plan_without_usage_is_rejected() {
    let b = Bundle::generate(3);
    let out = laglift(&["plan", "--registry", &b.path("registry.json"), "--manifest", &b.path("manifest.json")]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.contains("usage"), "{}", out.stderr);
}

#[test]
fn unknown_flag_prints_usage() {
    let out = laglift(&["plan", "--frobnicate"]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.contains("Usage"), "{}", out.stderr);
}

#[test]
fn manifest_and_tree_are_exclusive() {
    let b = Bundle::generate(3);
    let both = laglift(&[
        "report",
        "--registry",
        &b.path("registry.json"),
        "--manifest",
        &b.path("manifest.json"),
        "--tree",
        &b.path("manifest.json"),
    ]);
    assert_eq!(both.code, 1);
    let neither = laglift(&["report", "--registry", &b.path("registry.json")]);
    assert_eq!(neither.code, 1);
    assert!(both.stdout.is_empty() && neither.stdout.is_empty());
}

#[test]
fn report_on_tree_matches_restored_graph_metrics() {
    let b = Bundle::generate(11);
    let reg = RegistryIndex::load(Path::new(&b.path("registry.json"))).unwrap();
    let manifest = RootManifest::load(Path::new(&b.path("manifest.json"))).unwrap();
    let text = render_tree(&resolve_graph(&manifest, &reg).unwrap());
    let with_prefix: String = text.lines().map(|l| format!("[INFO] {l}\n")).collect();
    let tree = b.write("tree.txt", &with_prefix);

    let out = laglift(&["report", "--registry", &b.path("registry.json"), "--tree", &tree]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let got: GraphMetrics = serde_json::from_str(&out.stdout).unwrap();
    let restored = restore_edges(&parse_dep_tree(&with_prefix).unwrap(), &reg).unwrap();
    assert_eq!(got, graph_metrics(&restored, &reg).unwrap());
}

#[test]
fn report_text_has_one_row() {
    let b = Bundle::generate(4);
    let out = laglift(&["report", "--registry", &b.path("registry.json"), "--manifest", &b.path("manifest.json"), "--format", "text"]);
    assert_eq!(out.code, 0);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("node_count"));
}

#[test]
fn malformed_inputs_name_the_file() {
    let b = Bundle::generate(3);
    let bad = b.write("broken.json", "{\"packages\": [\n  {\"group\": 1}\n]}");
    let out = laglift(&["report", "--registry", &bad, "--manifest", &b.path("manifest.json")]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.contains("broken.json"), "{}", out.stderr);
    assert!(out.stderr.contains("line 2"), "{}", out.stderr);

    let tree = b.write("tree.txt", "com.example:app:jar:1.0\n+- not-a-coordinate\n");
    let out = laglift(&["report", "--registry", &b.path("registry.json"), "--tree", &tree]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("tree.txt") && out.stderr.contains("line 2"), "{}", out.stderr);

    let missing = laglift(&["report", "--registry", &b.path("nope.json"), "--manifest", &b.path("manifest.json")]);
    assert_eq!(missing.code, 1);
    assert!(missing.stderr.contains("nope.json"));
}

#[test]
fn output_flag_writes_file_instead_of_stdout() {
    let b = Bundle::generate(5);
    let target = b.path("plan.json");
    let mut args = plan_args(&b);
    args.extend(["--output".into(), target.clone()]);
    let out = laglift(&refs(&args));
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.is_empty());
    let direct = laglift(&refs(&plan_args(&b)));
    assert_eq!(std::fs::read_to_string(&target).unwrap(), direct.stdout);
}

#[test]
fn plan_text_lists_every_decision() {
    let b = Bundle::generate(6);
    let json = UpgradePlan::from_json(&laglift(&refs(&plan_args(&b))).stdout).unwrap();
    let mut args = plan_args(&b);
    args.extend(["--format".into(), "text".into()]);
    let out = laglift(&refs(&args));
    assert_eq!(out.code, 0);
    assert!(out.stdout.starts_with("mode"));
    for d in &json.decisions {
        assert!(out.stdout.contains(&d.package.to_string()));
    }
}

fn verify(b: &Bundle, plan: &str) -> Outcome {
    laglift(&[
        "verify",
        plan,
        "--registry",
        &b.path("registry.json"),
        "--manifest",
        &b.path("manifest.json"),
        "--usage",
        &b.path("usage.json"),
    ])
}

#[test]
fn verify_accepts_saved_plans_and_rejects_edits() {
    for seed in 0..20 {
        let b = Bundle::generate(seed);
        let saved = b.write("plan.json", &laglift(&refs(&plan_args(&b))).stdout);
        let ok = verify(&b, &saved);
        assert_eq!(ok.code, 0, "seed {seed}: {}", ok.stderr);

        let baseline = laglift(&["baseline", "--registry", &b.path("registry.json"), "--manifest", &b.path("manifest.json")]);
        assert_eq!(baseline.code, 0);
        let saved = b.write("baseline.json", &baseline.stdout);
        assert_eq!(verify(&b, &saved).code, 0, "seed {seed}");

        let mut plan = UpgradePlan::from_json(&std::fs::read_to_string(b.path("plan.json")).unwrap()).unwrap();
        if let Some(d) = plan.decisions.iter_mut().find(|d| d.to_version != d.from_version) {
            let name = d.package.to_string();
            d.to_version = d.from_version.clone();
            let edited = b.write("edited.json", &plan.to_json());
            let out = verify(&b, &edited);
            assert_eq!(out.code, 1);
            assert!(out.stdout.is_empty());
            assert!(out.stderr.contains(&name), "{}", out.stderr);
        }
    }
}

#[test]
fn verify_rejects_malformed_plan() {
    let b = Bundle::generate(1);
    let junk = b.write("junk.json", "{\"mode\": \"sideways\"}");
    let out = verify(&b, &junk);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("junk.json"));
}

#[test]
fn gen_rejects_out_of_range_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let target: PathBuf = dir.path().join("bundle");
    let out = laglift(&["gen", "--breaking-prob", "1.5", "--output", target.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(!target.exists());
    let out = laglift(&["gen", "--packages", "0", "--output", target.to_str().unwrap()]);
    assert_eq!(out.code, 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let b = Bundle::generate(8);
    let args = plan_args(&b);
    assert_eq!(laglift(&refs(&args)).stdout, laglift(&refs(&args)).stdout);
    let report = ["report", "--registry", &b.path("registry.json"), "--manifest", &b.path("manifest.json"), "--format", "text"];
    assert_eq!(laglift(&report).stdout, laglift(&report).stdout);
}
