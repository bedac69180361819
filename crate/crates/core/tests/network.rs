mod common;

use common::*;
use pcu_core::net::{
    backward, build_adjacency, coordinate_head, coordinate_head_backward, forward, gcn_layer, gcn_layer_backward,
    inception_densegcn, inception_densegcn_backward, node_shuffle, node_shuffle_backward, periodic_shuffle, refiner,
    refiner_backward, Activation, DenseBlockConfig, DenseBlockWeights, Init, LayerWeights, Mat, NetworkConfig,
    NetworkWeights, RefinerWeights, Variant,
};
use pcu_core::{metrics, Rng};

const LEAKY: Activation = Activation::LeakyRelu(0.2);

fn flat(layers: &[&LayerWeights]) -> Vec<f64> {
    layers.iter().flat_map(|l| l.params()).collect()
}

fn set_flat(layers: &mut [&mut LayerWeights], x: &[f64]) {
    let mut it = x.iter();
    for l in layers {
        for p in l.params_mut() {
            *p = *it.next().unwrap();
        }
    }
}

fn assert_grad(name: &str, x0: &[f64], g: &[f64], f: impl FnMut(&[f64]) -> f64) {
    let r = check_gradient(x0, g, 1e-6, f);
    assert!(r.checked > 0, "{name}: nothing checked");
    assert!(r.max_rel_err < 1e-4, "{name}: {}", r.max_rel_err);
}

#[test]
fn gcn_matches_dense_oracle() {
    let mut rng = Rng::new(1);
    for _ in 0..20 {
        let n = 2 + rng.below(63);
        let k = rng.below(n.min(9));
        let cloud = random_cloud(n, &mut rng);
        let adj = build_adjacency(&cloud, k).unwrap();
        let h = random_mat(n, 5, &mut rng);
        let w = random_layer(5, 7, &mut rng);
        let got = gcn_layer(&adj, &h, &w, LEAKY).unwrap();
        let mut pre = adj.to_dense().matmul(&h).matmul(&w.w);
        pre.add_row_vector(&w.b);
        let expect = pre.map(|x| LEAKY.apply(x));
        for (a, b) in got.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-10);
        }
        for i in 0..n {
            let s: f64 = adj.to_dense().row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn shuffle_preserves_entries() {
    let mut rng = Rng::new(2);
    for _ in 0..100 {
        let (n, c, r) = (1 + rng.below(20), 1 + rng.below(6), 2 + rng.below(3));
        let h = random_mat(n, c * r, &mut rng);
        let out = periodic_shuffle(h.clone(), r).unwrap();
        assert_eq!(out.shape(), (r * n, c));
        let mut a = h.data().to_vec();
        let mut b = out.data().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }
    assert!(periodic_shuffle(Mat::zeros(2, 5), 2).is_err());
}

#[test]
fn gcn_layer_gradients() {
    let mut rng = Rng::new(3);
    let cloud = random_cloud(10, &mut rng);
    let adj = build_adjacency(&cloud, 3).unwrap();
    let h = random_mat(10, 4, &mut rng);
    let w = random_layer(4, 5, &mut rng);
    let probe = random_mat(10, 5, &mut rng);
    let (gw, gh) = gcn_layer_backward(&adj, &h, &w, LEAKY, &probe).unwrap();
    assert_grad("gcn weights", &flat(&[&w]), &flat(&[&gw]), |x| {
        let mut w2 = w.clone();
        set_flat(&mut [&mut w2], x);
        probe_loss(&gcn_layer(&adj, &h, &w2, LEAKY).unwrap(), &probe)
    });
    assert_grad("gcn input", h.data(), gh.data(), |x| {
        let h2 = Mat::from_vec(10, 4, x.to_vec());
        probe_loss(&gcn_layer(&adj, &h2, &w, LEAKY).unwrap(), &probe)
    });
}

#[test]
fn dense_block_gradients_and_shape() {
    let mut rng = Rng::new(4);
    let cloud = random_cloud(64, &mut rng);
    let (a8, a16, base) = (
        build_adjacency(&cloud, 8).unwrap(),
        build_adjacency(&cloud, 16).unwrap(),
        build_adjacency(&cloud, 4).unwrap(),
    );
    let c = 4;
    let growth = 3;
    let branch = |rng: &mut Rng| vec![random_layer(c, growth, rng), random_layer(c + growth, growth, rng)];
    let w = DenseBlockWeights {
        branches: vec![branch(&mut rng), branch(&mut rng)],
        reduce: Some(random_layer(4 * growth, 6, &mut rng)),
    };
    let h = random_mat(64, c, &mut rng);
    let adjs = [&a8, &a16];
    let out = inception_densegcn(&adjs, &base, &h, &w, LEAKY).unwrap();
    assert_eq!(out.shape(), (64, 6));

    let probe = random_mat(64, 6, &mut rng);
    let (gw, gh) = inception_densegcn_backward(&adjs, &base, &h, &w, LEAKY, &probe).unwrap();
    let x0: Vec<f64> = w.layers().flat_map(|l| l.params()).collect();
    let g: Vec<f64> = gw.layers().flat_map(|l| l.params()).collect();
    assert_grad("dense weights", &x0, &g, |x| {
        let mut w2 = w.clone();
        let mut it = x.iter();
        for l in w2.branches.iter_mut().flatten().chain(w2.reduce.as_mut()) {
            for p in l.params_mut() {
                *p = *it.next().unwrap();
            }
        }
        probe_loss(&inception_densegcn(&adjs, &base, &h, &w2, LEAKY).unwrap(), &probe)
    });
    assert_grad("dense input", h.data(), gh.data(), |x| {
        let h2 = Mat::from_vec(64, c, x.to_vec());
        probe_loss(&inception_densegcn(&adjs, &base, &h2, &w, LEAKY).unwrap(), &probe)
    });
}

#[test]
fn node_shuffle_gradients() {
    let mut rng = Rng::new(5);
    let cloud = random_cloud(8, &mut rng);
    let adj = build_adjacency(&cloud, 2).unwrap();
    let h = random_mat(8, 3, &mut rng);
    let w = random_layer(3, 8, &mut rng);
    let probe = random_mat(32, 2, &mut rng);
    let out = node_shuffle(&h, &w, &adj, 4, LEAKY).unwrap();
    assert_eq!(out.shape(), (32, 2));
    let (gw, gh) = node_shuffle_backward(&h, &w, &adj, 4, LEAKY, &probe).unwrap();
    assert_grad("shuffle weights", &flat(&[&w]), &flat(&[&gw]), |x| {
        let mut w2 = w.clone();
        set_flat(&mut [&mut w2], x);
        probe_loss(&node_shuffle(&h, &w2, &adj, 4, LEAKY).unwrap(), &probe)
    });
    assert_grad("shuffle input", h.data(), gh.data(), |x| {
        let h2 = Mat::from_vec(8, 3, x.to_vec());
        probe_loss(&node_shuffle(&h2, &w, &adj, 4, LEAKY).unwrap(), &probe)
    });
}

#[test]
fn head_and_refiner_gradients_under_chamfer_loss() {
    let mut rng = Rng::new(6);
    let feats = random_mat(12, 4, &mut rng);
    let base = random_mat(12, 3, &mut rng);
    let head = random_layer(4, 3, &mut rng);
    let gt = random_cloud(12, &mut rng);
    let to_cloud = |m: &Mat| {
        pcu_core::PointCloud::new(
            (0..m.rows())
                .map(|i| pcu_core::Point3::new(m.get(i, 0), m.get(i, 1), m.get(i, 2)))
                .collect(),
        )
        .unwrap()
    };
    let loss = |m: &Mat| metrics::chamfer(&to_cloud(m), &gt).unwrap();
    let out = coordinate_head(&feats, &base, &head).unwrap();
    let (_, d_out) = pcu_core::net::chamfer_loss_grad(&to_cloud(&out), &gt).unwrap();
    let (gw, gf) = coordinate_head_backward(&feats, &base, &head, &d_out).unwrap();
    assert_grad("head weights", &flat(&[&head]), &flat(&[&gw]), |x| {
        let mut w2 = head.clone();
        set_flat(&mut [&mut w2], x);
        loss(&coordinate_head(&feats, &base, &w2).unwrap())
    });
    assert_grad("head features", feats.data(), gf.data(), |x| {
        loss(&coordinate_head(&Mat::from_vec(12, 4, x.to_vec()), &base, &head).unwrap())
    });

    let rw = RefinerWeights {
        hidden: random_layer(7, 5, &mut rng),
        out: random_layer(5, 3, &mut rng),
    };
    let refined = refiner(&feats, &base, &rw, LEAKY).unwrap();
    let (_, d_ref) = pcu_core::net::chamfer_loss_grad(&to_cloud(&refined), &gt).unwrap();
    let (grw, gfeat, gcoarse) = refiner_backward(&feats, &base, &rw, LEAKY, &d_ref).unwrap();
    assert_grad(
        "refiner weights",
        &flat(&[&rw.hidden, &rw.out]),
        &flat(&[&grw.hidden, &grw.out]),
        |x| {
            let mut w2 = rw.clone();
            set_flat(&mut [&mut w2.hidden, &mut w2.out], x);
            loss(&refiner(&feats, &base, &w2, LEAKY).unwrap())
        },
    );
    assert_grad("refiner features", feats.data(), gfeat.data(), |x| {
        loss(&refiner(&Mat::from_vec(12, 4, x.to_vec()), &base, &rw, LEAKY).unwrap())
    });
    assert_grad("refiner coarse", base.data(), gcoarse.data(), |x| {
        loss(&refiner(&feats, &Mat::from_vec(12, 3, x.to_vec()), &rw, LEAKY).unwrap())
    });
}

fn micro() -> NetworkConfig {
    NetworkConfig {
        variant: Variant::NoDenseGcn,
        r: 4,
        k_neighbors: 3,
        embed_width: 2,
        gcn_widths: vec![2],
        dense_block: DenseBlockConfig::default(),
        shuffle_width: 2,
        refiner_hidden: 2,
        leaky_slope: 0.2,
    }
}

#[test]
fn micro_network_gradient() {
    let config = micro();
    assert!(config.param_count() <= 100, "{}", config.param_count());
    let mut rng = Rng::new(7);
    let input = random_cloud(8, &mut rng);
    let target = random_cloud(32, &mut rng);
    let w = NetworkWeights::init(&config, Init::Glorot, 11);
    let (_, g) = backward(&config, &w, &input, &target).unwrap();
    let r = check_gradient(&w.to_flat(), &g.to_flat(), 1e-5, |x| {
        let wp = NetworkWeights::from_flat(&config, x).unwrap();
        metrics::chamfer(&forward(&config, &wp, &input).unwrap(), &target).unwrap()
    });
    assert!(r.max_rel_err < 1e-4, "{}", r.max_rel_err);
}

#[test]
fn point_count_contract_for_every_variant() {
    let base = NetworkConfig::default();
    for n in [64, 256, 512] {
        let input = random_cloud(n, &mut Rng::new(n as u64));
        let mut outs = Vec::new();
        for v in Variant::ALL {
            let c = base.with_variant(v);
            let w = NetworkWeights::init(&c, Init::Glorot, 1);
            let out = forward(&c, &w, &input).unwrap();
            assert_eq!(out.len(), 4 * n);
            outs.push(out);
        }
        assert_ne!(outs[0], outs[1]);
    }
}

#[test]
fn parameter_lattice() {
    let one = LayerWeights::zeros(3, 8);
    assert_eq!(one.param_count(), 32);
    let c = NetworkConfig::default();
    let p = |v: Variant| c.with_variant(v).param_count();
    let (a, b, cc, d) = (
        p(Variant::Original),
        p(Variant::NoDenseGcn),
        p(Variant::WithRefiner),
        p(Variant::NoDenseGcnWithRefiner),
    );
    assert!(b < a && a < cc);
    assert_eq!(a - b, c.dense_block_params());
    assert_eq!(d, b + c.with_variant(Variant::NoDenseGcnWithRefiner).refiner_params());
    for v in Variant::ALL {
        let cfg = c.with_variant(v);
        assert_eq!(
            NetworkWeights::init(&cfg, Init::Glorot, 0).param_count(),
            cfg.param_count()
        );
        assert_eq!(cfg.model_size_bytes(), 4 * cfg.param_count());
    }
}
