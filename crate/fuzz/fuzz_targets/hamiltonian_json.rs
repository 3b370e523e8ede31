#![no_main]

use libfuzzer_sys::fuzz_target;
use questa_core::Hamiltonian;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(h) = Hamiltonian::from_json(text) else {
        return;
    };
    // accepted input must survive a round trip unchanged
    let again = Hamiltonian::from_json(&h.to_json()).expect("re-parse emitted JSON");
    assert_eq!(again.qubits(), h.qubits());
    assert_eq!(again.terms().len(), h.terms().len());
    if h.qubits() <= 4 {
        let _ = h.dense_matrix();
    }
});
