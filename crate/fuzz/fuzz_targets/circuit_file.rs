#![no_main]

use libfuzzer_sys::fuzz_target;
use questa_cli::CircuitFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = CircuitFile::from_json(text) else {
        return;
    };
    let circuit = file.compile().expect("from_json only accepts compilable files");
    if circuit.qubits() <= 6 && circuit.ops().len() <= 256 {
        let params = vec![0.3; circuit.num_params()];
        let features = vec![0.1; circuit.num_features()];
        let _ = circuit.simulate(&params, &features);
    }
});
