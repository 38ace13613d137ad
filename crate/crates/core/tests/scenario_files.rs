use std::path::PathBuf;

use tensegrity::scenarios::{builtin, parse_scenario, BuiltinParams, BUILTINS};

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn shipped_files_match_the_builtins() {
    for name in BUILTINS {
        let path = scenario_dir().join(format!("{name}.toml"));
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_scenario(&text).unwrap();
        let expected = builtin(name, &BuiltinParams::default()).unwrap();
        assert_eq!(parsed.scenario, expected, "{}", path.display());
        parsed.scenario.build().unwrap();
    }
}

#[test]
fn shipped_files_are_the_canonical_serialization() {
    for name in BUILTINS {
        let text = std::fs::read_to_string(scenario_dir().join(format!("{name}.toml"))).unwrap();
        let expected = builtin(name, &BuiltinParams::default()).unwrap().to_toml().unwrap();
        assert_eq!(text.trim_end(), expected.trim_end(), "{name}");
    }
}
