use std::io::Cursor;

use fairbench::data::{
    fit_preprocess, generate_synthetic, prepare, split_indices, synthetic_table, transform, RawTable, SyntheticSpec,
    TableSchema,
};

const ADULT_SCHEMA: &str = include_str!("../../../schemas/adult.json");

// Kaggle-style header names, exercising the schema aliases.
const ADULT_ROWS: &str = "\
age,workclass,fnlwgt,education,educational-num,marital-status,occupation,relationship,race,gender,capital-gain,capital-loss,hours-per-week,native-country,income
25,Private,226802,11th,7,Never-married,Machine-op-inspct,Own-child,Black,Male,0,0,40,United-States,<=50K
38,Private,89814,HS-grad,9,Married-civ-spouse,Farming-fishing,Husband,White,Male,0,0,50,United-States,<=50K
28,Local-gov,336951,Assoc-acdm,12,Married-civ-spouse,Protective-serv,Husband,White,Male,0,0,40,United-States,>50K
44,Private,160323,Some-college,10,Married-civ-spouse,Machine-op-inspct,Husband,Black,Male,7688,0,40,United-States,>50K
18,?,103497,Some-college,10,Never-married,?,Own-child,White,Female,0,0,30,United-States,<=50K
34,Private,198693,10th,6,Never-married,Other-service,Not-in-family,White,Male,0,0,30,United-States,<=50K
29,?,227026,HS-grad,9,Never-married,?,Unmarried,Black,Male,0,0,40,United-States,<=50K
63,Self-emp-not-inc,104626,Prof-school,15,Married-civ-spouse,Prof-specialty,Husband,White,Male,3103,0,32,United-States,>50K.
24,Private,369667,Some-college,10,Never-married,Other-service,Unmarried,White,Female,0,0,40,United-States,<=50K.
55,Private,104996,7th-8th,4,Married-civ-spouse,Craft-repair,Husband,White,Male,0,0,10,United-States,<=50K
65,Private,184454,HS-grad,9,Married-civ-spouse,Machine-op-inspct,Husband,White,Male,6418,0,40,United-States,>50K
36,Federal-gov,212465,Bachelors,13,Married-civ-spouse,Adm-clerical,Husband,White,Male,0,0,40,United-States,<=50K
26,Private,82091,HS-grad,9,Never-married,Adm-clerical,Not-in-family,White,Female,0,0,39,United-States,<=50K
";

fn adult() -> RawTable {
    let schema = TableSchema::from_json_str(ADULT_SCHEMA).unwrap();
    RawTable::from_reader(Cursor::new(ADULT_ROWS), &schema).unwrap()
}

#[test]
fn adult_rows_with_missing_cells_are_dropped() {
    let t = adult();
    assert_eq!(t.dropped, 2);
    assert_eq!(t.len(), 11);
}

#[test]
fn adult_sensitive_aliases_and_feature_layout() {
    let t = adult();
    let by_alias = fit_preprocess(&t, Some("gender")).unwrap();
    let by_name = fit_preprocess(&t, Some("sex")).unwrap();
    assert_eq!(by_alias, by_name);
    assert_eq!(by_alias.sensitive, "sex");
    let names = by_alias.feature_names();
    assert!(!names.iter().any(|n| n.starts_with("race") || n.starts_with("sex") || n.starts_with("income")));
    assert!(names.contains(&"workclass=Private".to_string()));
    let ds = transform(&t, &by_alias).unwrap();
    assert_eq!(ds.dim(), names.len());
    // ">50K." and ">50K" share a code
    assert_eq!(ds.y.iter().filter(|&&v| v == 1).count(), 4);
    assert_eq!(ds.s.iter().filter(|&&v| v == 0).count(), 2);
    let race = fit_preprocess(&t, Some("race")).unwrap();
    assert_eq!(transform(&t, &race).unwrap().s.iter().filter(|&&v| v == 0).count(), 2);
    assert!(fit_preprocess(&t, Some("age")).is_err());
}

#[test]
fn standardization_is_fit_on_train_only() {
    let spec = SyntheticSpec {
        n: 500,
        ..SyntheticSpec::default()
    };
    let raw = synthetic_table(&spec).unwrap();
    let p = prepare(&raw, None, 0.8, 3).unwrap();
    let (n, d) = p.train.x.shape();
    assert_eq!(n, 400);
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| p.train.x.get(i, j)).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9, "column {j}: {mean} {var}");
    }
    assert_eq!(p.test.len(), 100);
}

#[test]
fn split_is_a_seeded_partition() {
    let (a, b) = split_indices(103, 0.8, 5).unwrap();
    let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..103).collect::<Vec<_>>());
    assert_eq!(a.len(), 82);
    assert_eq!(split_indices(103, 0.8, 5).unwrap(), (a.clone(), b));
    assert_ne!(split_indices(103, 0.8, 6).unwrap().0, a);
}

fn label_group_corr(spec: &SyntheticSpec) -> f64 {
    let ds = generate_synthetic(spec).unwrap();
    let n = ds.len() as f64;
    let ys: Vec<f64> = ds.y.iter().map(|&v| v as f64).collect();
    let ss: Vec<f64> = ds.s.iter().map(|&v| v as f64).collect();
    let (my, ms) = (ys.iter().sum::<f64>() / n, ss.iter().sum::<f64>() / n);
    let cov: f64 = ys.iter().zip(&ss).map(|(a, b)| (a - my) * (b - ms)).sum();
    let vy: f64 = ys.iter().map(|a| (a - my).powi(2)).sum();
    let vs: f64 = ss.iter().map(|b| (b - ms).powi(2)).sum();
    cov / (vy * vs).sqrt()
}

#[test]
fn label_bias_controls_label_group_dependence() {
    let independent = SyntheticSpec {
        n: 20_000,
        group_shift: 0.0,
        label_bias: 0.0,
        ..SyntheticSpec::default()
    };
    assert!(label_group_corr(&independent).abs() < 0.03);
    let biased = SyntheticSpec {
        label_bias: 0.4,
        ..independent.clone()
    };
    assert!(label_group_corr(&biased) > 0.3);
}

#[test]
fn synthetic_table_round_trips_through_csv() {
    let spec = SyntheticSpec {
        n: 50,
        d_num: 3,
        ..SyntheticSpec::default()
    };
    let table = synthetic_table(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    table.write_csv(&path).unwrap();
    let back = fairbench::data::load_table(&path, &spec.schema()).unwrap();
    assert_eq!(back, table);
    let direct = generate_synthetic(&spec).unwrap();
    let pre = fit_preprocess(&table, None).unwrap();
    let encoded = transform(&table, &pre).unwrap();
    assert_eq!(encoded.y, direct.y);
    assert_eq!(encoded.s, direct.s);
}

#[test]
fn headerless_uci_files_use_positional_columns() {
    // adult.test style: a comment line, no header, ", " separators and a
    // trailing period on the label.
    let text = "|1x3 Cross validator\n\
        25, Private, 226802, 11th, 7, Never-married, Machine-op-inspct, Own-child, Black, Male, 0, 0, 40, United-States, <=50K.\n\
        38, Private, 89814, HS-grad, 9, Married-civ-spouse, Farming-fishing, Husband, White, Female, 0, 0, 50, United-States, >50K.\n\
        28, ?, 336951, Assoc-acdm, 12, Married-civ-spouse, ?, Husband, White, Male, 0, 0, 40, United-States, >50K.\n";
    let schema = TableSchema::from_json_str(ADULT_SCHEMA).unwrap();
    let t = RawTable::from_reader(Cursor::new(text), &schema).unwrap();
    assert_eq!((t.len(), t.dropped), (2, 1));
    assert_eq!(t.rows[0][0], "25");
    let pre = fit_preprocess(&t, Some("gender")).unwrap();
    let ds = transform(&t, &pre).unwrap();
    assert_eq!((ds.y.clone(), ds.s.clone()), (vec![0, 1], vec![1, 0]));

    let mut strict = schema.clone();
    strict.file_columns.clear();
    assert!(RawTable::from_reader(Cursor::new(text), &strict).is_err());
}
