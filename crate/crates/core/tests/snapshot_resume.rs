use foam::bench::{OptimizerKind, OptimizerSpec};
use foam::optim::{Optimizer, OptimizerConfig, OptimizerSnapshot, ParamSpec};
use foam::tasks::{make_task, TaskSpec, TaskState};

fn setup(quant8: bool) -> (TaskState, Optimizer) {
    let task = make_task(&TaskSpec::mlp(6, 12, 3, 128, 16, 21)).unwrap();
    let spec = OptimizerSpec {
        kind: OptimizerKind::Foam,
        config: OptimizerConfig {
            level: 2,
            quant8,
            quant_block_len: 8,
            ..OptimizerConfig::default()
        },
    };
    let params: Vec<ParamSpec> = task.params().iter().map(|p| spec.param_spec(p)).collect();
    let opt = Optimizer::new(spec.config.clone(), &params).unwrap();
    (task, opt)
}

fn train(task: &mut TaskState, opt: &mut Optimizer, steps: u64, start: u64) {
    let mut w = task.param_values();
    for t in start..start + steps {
        let batch = task.sample_batch();
        let (_, g) = task.loss_and_grad(&batch).unwrap();
        opt.step(&mut w, &g, 0.01 / (t as f64).sqrt()).unwrap();
        task.set_param_values(w.clone()).unwrap();
    }
}

fn resume_is_bit_exact(quant8: bool) {
    let (mut task_a, mut opt_a) = setup(quant8);
    train(&mut task_a, &mut opt_a, 60, 1);

    let (mut task_b, mut opt_b) = setup(quant8);
    train(&mut task_b, &mut opt_b, 25, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("opt.json");
    OptimizerSnapshot::capture(&opt_b).save(&path).unwrap();
    drop(opt_b);
    let mut opt_b = OptimizerSnapshot::load(&path).unwrap().restore().unwrap();
    train(&mut task_b, &mut opt_b, 35, 26);

    assert_eq!(task_a.param_values(), task_b.param_values());
    assert_eq!(
        OptimizerSnapshot::capture(&opt_a).to_json().unwrap(),
        OptimizerSnapshot::capture(&opt_b).to_json().unwrap()
    );
}

#[test]
fn dense_resume_is_bit_exact() {
    resume_is_bit_exact(false);
}

#[test]
fn quantized_resume_is_bit_exact() {
    resume_is_bit_exact(true);
}

#[test]
fn corrupted_snapshot_is_rejected() {
    let (_, opt) = setup(false);
    let json = OptimizerSnapshot::capture(&opt).to_json().unwrap();
    let tampered = json.replacen("\"step\":0", "\"step\":3", 1);
    assert_ne!(tampered, json);
    assert!(OptimizerSnapshot::from_json(&tampered).and_then(|s| s.restore()).is_err());
    assert!(OptimizerSnapshot::from_json("{\"schema\": 1}").is_err());
}
