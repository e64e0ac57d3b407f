use tensor_core::{Tape, Tensor};

#[test]
fn matmul_identity_and_zero() {
    let mut tape = Tape::new();
    let a = tape.constant(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
    let eye = tape.constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
    let c = tape.matmul(a, eye).unwrap();
    assert_eq!(tape.value(c), &[1.0, 2.0, 3.0, 4.0]);

    let zero = tape.constant(vec![2, 3], vec![0.0; 6]);
    let z = tape.matmul(a, zero).unwrap();
    assert!(tape.value(z).iter().all(|&v| v == 0.0));
}

#[test]
fn matmul_hand_reference() {
    let mut tape = Tape::new();
    let a = tape.constant(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
    let b = tape.constant(vec![2, 1], vec![5.0, 6.0]);
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(c), &[17.0, 39.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(vec![2, 3], vec![0.0; 6]);
    let b = tape.constant(vec![2, 2], vec![0.0; 4]);
    let err = tape.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
}

#[test]
fn elementwise_fixed_points() {
    let mut tape = Tape::new();
    let x = tape.constant(vec![1], vec![0.0]);
    let s = tape.sigmoid(x);
    let t = tape.tanh(x);
    assert_eq!(tape.value(s), &[0.5]);
    assert_eq!(tape.value(t), &[0.0]);

    let a = tape.constant(vec![2], vec![1.0, 2.0]);
    let b = tape.constant(vec![2], vec![3.0, 4.0]);
    let h = tape.hadamard(a, b).unwrap();
    assert_eq!(tape.value(h), &[3.0, 8.0]);

    let c = tape.constant(vec![3], vec![0.0; 3]);
    let err = tape.add(a, c).unwrap_err().to_string();
    assert!(err.contains("[2]") && err.contains("[3]"), "{err}");
}

#[test]
fn softmax_uniform_closed_form_and_shift_invariance() {
    let mut tape = Tape::new();
    let x = tape.constant(vec![1, 3], vec![4.2, 4.2, 4.2]);
    let y = tape.softmax_last(x);
    for &v in tape.value(y) {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    let x2 = tape.constant(vec![1, 2], vec![0.0, 3.0f64.ln()]);
    let y2 = tape.softmax_last(x2);
    assert!((tape.value(y2)[0] - 0.25).abs() < 1e-12);
    assert!((tape.value(y2)[1] - 0.75).abs() < 1e-12);

    let x3 = tape.constant(vec![1, 4], vec![0.3, -1.2, 2.0, 0.9]);
    let x3_shift = tape.affine(x3, 1.0, 17.5);
    let y3 = tape.softmax_last(x3);
    let y3s = tape.softmax_last(x3_shift);
    let sum: f64 = tape.value(y3).iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
    for (a, b) in tape.value(y3).iter().zip(tape.value(y3s)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn backward_quadratic_and_constant() {
    let mut tape = Tape::new();
    let x = Tensor::from_vec(vec![1], vec![3.0]).with_grad();
    let xid = tape.param(&x);
    let sq = tape.square(xid).unwrap();
    let loss = tape.sum_all(sq);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(xid), vec![6.0]);

    // constant loss: nothing requires grad, all grads stay zero
    let mut tape = Tape::new();
    let xid = tape.param(&x);
    let c = tape.scalar(5.0);
    tape.backward(c).unwrap();
    assert_eq!(tape.grad(xid), vec![0.0]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut tape = Tape::new();
    let x = tape.constant(vec![2], vec![1.0, 2.0]);
    let err = tape.backward(x).unwrap_err().to_string();
    assert!(err.contains("scalar"), "{err}");
}

#[test]
fn backward_on_disconnected_tensor_leaves_grad_zero() {
    let mut tape = Tape::new();
    let x = Tensor::from_vec(vec![2], vec![1.0, 2.0]).with_grad();
    let connected = tape.param(&x);
    let disconnected = tape.param(&x);
    let sq = tape.square(connected).unwrap();
    let loss = tape.sum_all(sq);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(disconnected), vec![0.0, 0.0]);
    assert_eq!(tape.grad(connected), vec![2.0, 4.0]);
}

#[test]
fn repeated_backward_accumulates_until_reset() {
    let mut tape = Tape::new();
    let x = Tensor::from_vec(vec![1], vec![2.0]).with_grad();
    let xid = tape.param(&x);
    let sq = tape.square(xid).unwrap();
    let loss = tape.sum_all(sq);
    tape.backward(loss).unwrap();
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(xid), vec![8.0]);
    tape.reset_grads();
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(xid), vec![4.0]);
}

#[test]
fn backward_over_empty_tape_is_noop() {
    let mut tape = Tape::new();
    let loss = tape.scalar(1.0);
    tape.backward(loss).unwrap();
    assert!(tape.len() == 1);
}
