use fairegm::experiment::{make_split, run_cell, DEFAULT_TEST_FRACTION};
use fairegm::io::{export_embeddings, load_dataset, read_embeddings, read_results, read_split, write_results, write_split, ResultRow, SplitFiles};
use fairegm::metrics::{dp_at_ks, summarize};
use fairegm::synthetic::PlantedPartition;
use fairegm::training::UpdateSource;
use fairegm::{DatasetKind, DatasetSpec, EvalConfig, ParamKey, TrainConfig, Variant};

fn write_csv_dataset(dir: &std::path::Path) {
    let ds = PlantedPartition { nodes: 90, groups: 3, edges: 300, features: 6, ..PlantedPartition::default() }
        .generate()
        .unwrap();
    let g = &ds.graph;
    let mut nodes = String::from("id,sensitive,f0,f1,f2,f3,f4,f5\n");
    for v in 0..g.num_nodes() {
        let feats: Vec<String> = g.features().row(v).iter().map(|x| x.to_string()).collect();
        nodes.push_str(&format!("n{:03},{},{}\n", v, ["red", "green", "blue"][g.group_of(v)], feats.join(",")));
    }
    let mut edges = String::from("source,target\n");
    for &(u, v) in g.edges() {
        edges.push_str(&format!("n{u:03},n{v:03}\n"));
    }
    std::fs::write(dir.join("nodes.csv"), nodes).unwrap();
    std::fs::write(dir.join("edges.csv"), edges).unwrap();
}

#[test]
fn csv_dataset_through_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    write_csv_dataset(dir.path());
    let spec = DatasetSpec::new(DatasetKind::GenericCsv, dir.path().to_string_lossy());
    let ds = load_dataset(&spec).unwrap();
    assert_eq!((ds.graph.num_nodes(), ds.graph.num_edges(), ds.graph.num_groups()), (90, 300, 3));

    let eval = EvalConfig { ks: vec![5, 10], ..EvalConfig::default() };
    let mut rows = Vec::new();
    for split_index in 0..2u64 {
        let split = make_split(&ds.graph, split_index, DEFAULT_TEST_FRACTION).unwrap();
        for variant in [Variant::Base, Variant::Gfo, Variant::Cfo { c: 4 }, Variant::Few, Variant::Aug { lambda: 10.0 }] {
            let mut cfg = TrainConfig::new(variant);
            cfg.epochs = 30;
            cfg.learning_rate = 1e-2;
            cfg.seed = split_index;
            let cell = run_cell(&split, split_index, &cfg, &eval).unwrap();
            let h = &cell.trained.history;
            assert_eq!(h.len(), 30);
            // Fairness tensors are only ever moved by the divergence objective.
            for u in &h.updates {
                let fair = u.params.iter().any(|k| {
                    matches!(k, ParamKey::GfoOffset | ParamKey::CfoEdges | ParamKey::CfoFeatures | ParamKey::FewWeights)
                });
                assert!(!fair || u.source == UpdateSource::ScaledDivergence);
            }
            let r = &cell.record;
            assert!((0.0..=1.0).contains(&r.auroc) && (0.0..=1.0).contains(&r.f1));
            assert!(r.dp.iter().all(|&(_, v)| v >= 0.0));
            assert!(h.reconstruction.iter().chain(&h.divergence).all(|x| x.is_finite()));
            assert_eq!(variant.has_fairness_params(), h.updates.iter().any(|u| u.source == UpdateSource::ScaledDivergence));
            rows.push(ResultRow { dataset: ds.name.clone(), model: variant.to_string(), record: cell.record });
        }
    }

    let path = dir.path().join("out/results.csv");
    write_results(&rows, &path).unwrap();
    assert_eq!(read_results(&path).unwrap(), rows);
    let gfo: Vec<_> = rows.iter().filter(|r| r.model == "GFO").map(|r| r.record.clone()).collect();
    assert_eq!(summarize(&gfo).unwrap().runs, 2);
}

#[test]
fn exported_embeddings_and_splits_round_trip() {
    let ds = PlantedPartition { nodes: 70, edges: 220, ..PlantedPartition::default() }.generate().unwrap();
    let split = make_split(&ds.graph, 4, DEFAULT_TEST_FRACTION).unwrap();
    let mut cfg = TrainConfig::new(Variant::Gfo);
    cfg.epochs = 5;
    let eval = EvalConfig { ks: vec![3, 7], ..EvalConfig::default() };
    let cell = run_cell(&split, 4, &cfg, &eval).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String> = split.train_to_original.iter().map(|&v| ds.node_ids[v].clone()).collect();
    let emb_path = dir.path().join("emb.csv");
    export_embeddings(&cell.trained.embeddings, split.train.groups(), &ids, &emb_path).unwrap();
    let table = read_embeddings(&emb_path).unwrap();
    assert_eq!(table.embeddings, cell.trained.embeddings);
    assert_eq!(table.groups, split.train.groups());
    assert_eq!(dp_at_ks(&table.embeddings, &split.train, &[3, 7]).unwrap(), cell.record.dp);

    let files = SplitFiles::from_split(&split, &ds.node_ids);
    write_split(&files, &dir.path().join("split")).unwrap();
    let back = read_split(&dir.path().join("split")).unwrap();
    assert_eq!(back, files);
    assert_eq!(back.test_edges.len(), split.test_pos.len());
}

#[test]
fn missing_dataset_reports_path() {
    let err = load_dataset(&"content-cites:/nonexistent/cora".parse().unwrap()).unwrap_err();
    assert!(err.to_string().contains("/nonexistent"), "{err}");
}
