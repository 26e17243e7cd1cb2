use bespoke_core::hdl::*;
use bespoke_core::reduce::Compressor;
use bespoke_core::Error;

fn builder() -> NetlistBuilder {
    NetlistBuilder::new()
}

fn finish(b: NetlistBuilder, inputs: Vec<u32>, out: Vec<Signal>) -> Netlist {
    let x = vec![Port {
        name: "x".into(),
        bits: inputs.into_iter().map(Signal::Net).collect(),
    }];
    b.finish(
        x,
        vec![Port {
            name: "y".into(),
            bits: out,
        }],
    )
}

#[test]
fn full_adder_truth_table() {
    let mut b = builder();
    let i: Vec<u32> = (0..3).map(|_| b.net()).collect();
    let (s, c) = b.full_add(Signal::Net(i[0]), Signal::Net(i[1]), Signal::Net(i[2]));
    let n = finish(b, i, vec![s, c]);
    assert_eq!(n.gate_count().fa, 1);
    assert_eq!(n.simulate(&[true, true, true]).unwrap(), vec![true, true]);
    for v in 0..8u32 {
        let bits: Vec<bool> = (0..3).map(|k| v >> k & 1 == 1).collect();
        let o = n.simulate(&bits).unwrap();
        let sum = v.count_ones();
        assert_eq!(o, vec![sum & 1 == 1, sum >= 2]);
    }
}

#[test]
fn identity_wiring_passes_inputs_through() {
    let mut b = builder();
    let i: Vec<u32> = (0..4).map(|_| b.net()).collect();
    let out = i.iter().map(|&n| Signal::Net(n)).collect();
    let n = finish(b, i, out);
    assert!(n.cells.is_empty());
    let v = [true, false, false, true];
    assert_eq!(n.simulate(&v).unwrap(), v.to_vec());
}

#[test]
fn two_bit_ripple_adder_is_one_ha_one_fa() {
    let mut b = builder();
    let i: Vec<u32> = (0..4).map(|_| b.net()).collect();
    let a = [Signal::Net(i[0]), Signal::Net(i[1])];
    let c = [Signal::Net(i[2]), Signal::Net(i[3])];
    let (mut s, carry) = b.add(&a, &c, Signal::Const(false));
    s.push(carry);
    let n = finish(b, i, s);
    let g = n.gate_count();
    assert_eq!((g.ha, g.fa, g.total()), (1, 1, 2));
    for v in 0..16u64 {
        let bits: Vec<bool> = (0..4).map(|k| v >> k & 1 == 1).collect();
        let o = n.simulate(&bits).unwrap();
        let got: u64 = o.iter().enumerate().map(|(k, &x)| u64::from(x) << k).sum();
        assert_eq!(got, (v & 3) + (v >> 2));
    }
}

#[test]
fn constants_fold_away() {
    let mut b = builder();
    let i = vec![b.net()];
    let x = Signal::Net(i[0]);
    let (s, c) = b.full_add(x, Signal::Const(true), Signal::Const(true));
    let n = finish(b, i, vec![s, c]);
    assert_eq!(n.gate_count().total(), 0);
    assert_eq!(n.simulate(&[true]).unwrap(), vec![true, true]);
}

#[test]
fn width_mismatch_is_reported() {
    let mut b = builder();
    let i = vec![b.net()];
    let n = finish(b, i.clone(), vec![Signal::Net(i[0])]);
    assert_eq!(
        n.simulate(&[true, false]),
        Err(Error::WidthMismatch { expected: 1, got: 2 })
    );
}

#[test]
fn double_driver_is_malformed() {
    let n = Netlist {
        n_nets: 2,
        inputs: vec![Port {
            name: "x".into(),
            bits: vec![Signal::Net(0)],
        }],
        outputs: vec![],
        cells: vec![Cell {
            kind: CellKind::Inv,
            inputs: vec![0],
            outputs: vec![0],
        }],
    };
    assert!(matches!(n.validate(), Err(Error::MalformedNetlist(_))));
}

#[test]
fn loop_is_malformed() {
    let n = Netlist {
        n_nets: 2,
        inputs: vec![],
        outputs: vec![],
        cells: vec![
            Cell {
                kind: CellKind::Inv,
                inputs: vec![1],
                outputs: vec![0],
            },
            Cell {
                kind: CellKind::Inv,
                inputs: vec![0],
                outputs: vec![1],
            },
        ],
    };
    assert!(matches!(n.validate(), Err(Error::MalformedNetlist(_))));
}
