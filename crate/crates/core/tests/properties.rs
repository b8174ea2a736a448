use proptest::prelude::*;

use blocknet::block::block_param_count;
use blocknet::geometry::{segments_intersect, Intersection};
use blocknet::model_io::{decode_network, encode_network};
use blocknet::net::param_count;
use blocknet::{
    compose, forward, forward_block, gen_spec, init_network, mlp_specs, verify_spec, BaseModel, BlockSpec, Matrix,
    Network, Point, Rng, Segment, Task,
};

fn task() -> impl Strategy<Value = Task> {
    (0..6usize).prop_map(|i| Task::ALL[i])
}

fn point() -> impl Strategy<Value = Point> {
    (0.0..32.0f64, 0.0..32.0f64).prop_map(|(x, y)| Point { x, y })
}

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Hand-rolled count: block layer d sees block layer d-1 plus every base's
/// hidden layer d-1; removed layers contribute nothing.
fn counted_by_hand(spec: BlockSpec, m: usize, base: [usize; 3], input: usize) -> usize {
    let mut total = 0;
    let mut prev = 0;
    if spec.h1 > 0 {
        total += spec.h1 * (input + 1);
        prev = spec.h1;
    }
    if spec.h2 > 0 {
        total += spec.h2 * (prev + m * base[0] + 1);
        prev = spec.h2;
    }
    total += spec.h3 * (prev + m * base[1] + 1);
    total + spec.h3 + 1
}

fn bases(m: usize, input: usize, widths: [usize; 3], seed: u64) -> Vec<BaseModel> {
    (0..m)
        .map(|i| {
            BaseModel::new(
                Task::ALL[i],
                init_network(&mlp_specs(input, &widths), seed + i as u64).unwrap(),
            )
        })
        .collect()
}

fn perturbed(net: &Network, layer: usize) -> Network {
    let mut net = net.clone();
    for w in net.layers_mut()[layer].weights.iter_mut() {
        *w += 0.37;
    }
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_specs_verify(task in task(), label in 0..2u8, seed in any::<u64>()) {
        let spec = gen_spec(task, label, &mut Rng::new(seed)).unwrap();
        let v = verify_spec(&spec);
        prop_assert!(v.is_valid(), "{:?}", v.violations);
        prop_assert_eq!(spec.segments.len(), task.segment_count(label));
    }

    #[test]
    fn intersection_agrees_with_orientation_test(a in point(), b in point(), c in point(), d in point()) {
        let o = [orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)];
        prop_assume!(o.iter().all(|v| v.abs() > 1e-6));
        let s1 = Segment { a, b };
        let s2 = Segment { a: c, b: d };
        let crosses = o[0] * o[1] < 0.0 && o[2] * o[3] < 0.0;
        match segments_intersect(&s1, &s2) {
            Intersection::Crossing { t1, t2 } => {
                prop_assert!(crosses);
                let (p, q) = (s1.point_at(t1), s2.point_at(t2));
                prop_assert!(p.distance(q) < 1e-9);
            }
            Intersection::Disjoint => prop_assert!(!crosses),
            Intersection::CollinearOverlap => prop_assert!(false, "general position cannot overlap"),
        }
    }

    #[test]
    fn batched_forward_matches_single_rows(
        input in 1..12usize,
        widths in prop::collection::vec(1..10usize, 1..4),
        rows in 1..7usize,
        seed in any::<u64>(),
    ) {
        let net = init_network(&mlp_specs(input, &widths), seed).unwrap();
        let x = matrix(rows, input, seed ^ 1);
        let (batched, _) = forward(&net, &x).unwrap();
        for (r, b) in batched.iter().enumerate() {
            let single = Matrix::from_vec(1, input, x.row(r).to_vec());
            let (p, _) = forward(&net, &single).unwrap();
            prop_assert!((p[0] - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn serialized_size_matches_param_count(
        input in 1..40usize,
        widths in prop::collection::vec(1..20usize, 1..4),
        seed in any::<u64>(),
    ) {
        let net = init_network(&mlp_specs(input, &widths), seed).unwrap();
        let bytes = encode_network(&net);
        let layers = widths.len() + 1;
        prop_assert_eq!(bytes.len(), 7 + 10 * layers + 8 * param_count(&net));
        prop_assert_eq!(encode_network(&decode_network(&bytes).unwrap()), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn block_param_count_law(
        h in prop::array::uniform3(prop::sample::select(vec![0usize, 1, 50])),
        m in 1..=5usize,
    ) {
        let Ok(spec) = BlockSpec::new(h[0], h[1], h[2]) else {
            prop_assume!(false);
            unreachable!()
        };
        let widths = [20, 10, 5];
        let bn = compose(&bases(m, 16, widths, 3), spec, 9).unwrap();
        let by_hand = counted_by_hand(spec, m, widths, 16);
        prop_assert_eq!(bn.trainable_params(), by_hand);
        prop_assert_eq!(block_param_count(spec, m, widths, 16), by_hand);
    }

    #[test]
    fn blocks_ignore_deep_base_layers(m in 1..=4usize, which in 0..4usize, seed in any::<u64>()) {
        let widths = [7, 6, 5];
        let original = bases(m, 9, widths, seed % 1000);
        let x = matrix(5, 9, seed);
        let spec = BlockSpec::new(4, 3, 2).unwrap();
        let bn = compose(&original, spec, seed).unwrap();
        let (before, _) = forward_block(&bn, &x).unwrap();
        let victim = which % m;

        // Hidden layer 3 and the output layer of a base never feed the block.
        for layer in [2, 3] {
            let mut changed = original.clone();
            changed[victim] = BaseModel::new(changed[victim].task, perturbed(original[victim].network(), layer));
            let (after, _) = forward_block(&compose(&changed, spec, seed).unwrap(), &x).unwrap();
            prop_assert_eq!(&after, &before);
        }

        // Hidden layer 1 does, through the lateral activations. The bias shift
        // exceeds any |w.x| here, so every unit turns on.
        let mut net = original[victim].network().clone();
        net.layers_mut()[0].biases.iter_mut().for_each(|b| *b += 100.0);
        let mut changed = original.clone();
        changed[victim] = BaseModel::new(changed[victim].task, net);
        let lateral = compose(&changed, spec, seed).unwrap().lateral_batch(&x).unwrap().lateral;
        prop_assert_ne!(&lateral[0], &bn.lateral_batch(&x).unwrap().lateral[0]);
    }
}
