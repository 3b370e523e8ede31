#![no_main]

use libfuzzer_sys::fuzz_target;
use questa_core::tasks::{read_csv_dataset, DatasetSchema};

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    let schemas = [
        DatasetSchema::Classification {
            label_column: "label".into(),
            classes: None,
        },
        DatasetSchema::Representation {
            x_column: "x".into(),
            y_column: "y".into(),
        },
    ];
    for schema in &schemas {
        let _ = read_csv_dataset(data, schema);
    }
});
