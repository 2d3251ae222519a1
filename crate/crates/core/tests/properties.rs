//! Randomized checks of cross-module invariants.

use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use warpcomp::autodiff::{grad_check, Adjacency, ParamSet, ParamVars, Tape, Tensor, Var, DEFAULT_EPS};
use warpcomp::eval::improvement;
use warpcomp::geometry::{resample_uniform, ChamberSpec, Placement, PointCloud, SpatialIndex, TriangleMesh, Vec3};
use warpcomp::graphnet::{Engine, EngineKind, NetworkConfig};
use warpcomp::oracle::{simulate_print, warp_displacement, warp_with_jacobian, WarpSpec};
use warpcomp::registration::{correspond, icp_align};
use warpcomp::remesh::{remesh, surface_voxels, voxelize};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_cloud(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) * scale)
        .collect()
}

fn params(tensors: Vec<Tensor>) -> ParamSet {
    let mut p = ParamSet::new();
    for (i, t) in tensors.into_iter().enumerate() {
        p.push(format!("t{i}"), t).unwrap();
    }
    p
}

/// Linear scalar readout `Σ y·R` with a fixed random `R`.
fn readout(t: &mut Tape, y: Var, seed: u64) -> warpcomp::Result<Var> {
    let cols = t.value(y).cols();
    let r = t.constant(random_matrix(&mut rng(seed), cols, 1));
    let z = t.affine(y, r, None)?;
    Ok(t.sum(z))
}

fn ring(n: usize) -> Arc<Adjacency> {
    let lists: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n, (i + 2) % n]).collect();
    Arc::new(Adjacency::new(&lists).unwrap())
}

fn check<F>(p: &ParamSet, f: F) -> f64
where
    F: Fn(&mut Tape, &ParamVars) -> warpcomp::Result<Var>,
{
    grad_check(f, p, DEFAULT_EPS).unwrap().max_rel_error
}

/// Central differences carry no truncation error for maps linear in each
/// parameter, so a wide step only shrinks the roundoff.
fn check_linear<F>(p: &ParamSet, f: F) -> f64
where
    F: Fn(&mut Tape, &ParamVars) -> warpcomp::Result<Var>,
{
    grad_check(f, p, 1.0).unwrap().max_rel_error
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_primitives_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(3..7);
        let p = params(vec![
            random_matrix(&mut r, n, 3),
            random_matrix(&mut r, 3, 4),
            Tensor::vector((0..4).map(|_| r.gen_range(-1.0..1.0)).collect()),
            random_matrix(&mut r, n, 3),
        ]);
        let adj = ring(n);
        let err = check_linear(&p, |t, v| {
            let a = t.affine(v.get(0), v.get(1), Some(v.get(2)))?;
            let g = t.gather_mean(v.get(3), &adj)?;
            let c = t.concat(a, g)?;
            readout(t, c, seed)
        });
        prop_assert!(err <= 1e-9, "affine/gather/concat {err}");

        let err = check_linear(&p, |t, v| {
            let s = t.scale_shift(v.get(0), &[2.0, -0.5, 3.0], &[1.0, 0.0, -2.0])?;
            let c = t.center_rows(v.get(3))?;
            let d = t.sub(s, c)?;
            let e = t.add(d, v.get(3))?;
            let a = readout(t, e, seed ^ 1)?;
            let b = t.sum(v.get(0));
            t.weighted_sum(&[(a, 0.7), (b, -1.3)])
        });
        prop_assert!(err <= 1e-9, "scale/center/add/sub/sum {err}");
    }

    #[test]
    fn relu_matches_finite_differences_away_from_zero(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut x = random_matrix(&mut r, 5, 3);
        for v in x.data_mut() {
            // Keep every input clear of the kink.
            if v.abs() < 1e-2 {
                *v += 0.05;
            }
        }
        let p = params(vec![x]);
        let err = check(&p, |t, v| {
            let y = t.relu(v.get(0));
            readout(t, y, seed)
        });
        prop_assert!(err <= 1e-4, "relu {err}");
    }

    #[test]
    fn loss_heads_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, m) = (r.gen_range(3..12), r.gen_range(3..12));
        let a = random_matrix(&mut r, n, 3);
        let b = random_matrix(&mut r, n, 3);
        let c = random_matrix(&mut r, m, 3);
        let p = params(vec![a, b, c]);
        let err = check(&p, |t, v| t.l2_loss(v.get(0), v.get(1)));
        prop_assert!(err <= 1e-4, "l2 {err}");
        let err = check(&p, |t, v| t.chamfer(v.get(0), v.get(2)));
        prop_assert!(err <= 1e-4, "chamfer {err}");
    }

    #[test]
    fn point_map_matches_finite_differences(seed in any::<u64>()) {
        let spec = WarpSpec::default();
        let mut r = rng(seed);
        let pts: Vec<f64> = (0..4)
            .flat_map(|_| [r.gen_range(20.0..360.0), r.gen_range(20.0..264.0), r.gen_range(20.0..360.0)])
            .collect();
        let p = params(vec![Tensor::matrix(4, 3, pts).unwrap()]);
        let err = check(&p, |t, v| {
            let y = t.map_points(v.get(0), |q| warp_with_jacobian(q, &spec))?;
            readout(t, y, seed)
        });
        prop_assert!(err <= 1e-4, "point map {err}");
    }

    #[test]
    fn tape_replay_is_bit_identical(seed in any::<u64>()) {
        let chamber = ChamberSpec::default();
        let config = NetworkConfig { widths: vec![8, 8], ..Default::default() };
        let engine = Engine::with_random_head(EngineKind::Predictor, config, &chamber, seed).unwrap();
        let mut r = rng(seed);
        let x: Vec<f64> = random_cloud(&mut r, 6, 50.0).iter().flat_map(|p| [p.x + 190.0, p.y + 142.0, p.z + 190.0]).collect();
        let target = random_matrix(&mut r, 6, 3);
        let replay = || {
            let mut t = Tape::new();
            let vars = t.params(&engine.params);
            let xv = t.constant(Tensor::matrix(6, 3, x.clone()).unwrap());
            let y = engine.record(&mut t, xv, &ring(6), &vars).unwrap();
            let tv = t.constant(target.clone());
            let d = t.sub(y, xv).unwrap();
            let loss = t.l2_loss(d, tv).unwrap();
            let g = t.backward(loss).unwrap().for_params(&t, &vars);
            (t.value(loss).item().unwrap(), g)
        };
        let (l1, g1) = replay();
        let (l2, g2) = replay();
        prop_assert_eq!(l1.to_bits(), l2.to_bits());
        prop_assert_eq!(g1, g2);
    }

    #[test]
    fn batch_gradient_is_sum_of_sample_gradients(seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = params(vec![random_matrix(&mut r, 3, 3)]);
        let xs = [random_matrix(&mut r, 5, 3), random_matrix(&mut r, 7, 3)];
        let ys = [random_matrix(&mut r, 5, 3), random_matrix(&mut r, 7, 3)];
        let loss_of = |t: &mut Tape, v: &ParamVars, k: usize| {
            let x = t.constant(xs[k].clone());
            let y = t.constant(ys[k].clone());
            let p = t.affine(x, v.get(0), None).unwrap();
            t.l2_loss(p, y).unwrap()
        };
        let grad = |ks: &[usize]| {
            let mut t = Tape::new();
            let v = t.params(&w);
            let terms: Vec<(Var, f64)> = ks.iter().map(|&k| (loss_of(&mut t, &v, k), 1.0)).collect();
            let total = t.weighted_sum(&terms).unwrap();
            t.backward(total).unwrap().for_params(&t, &v)[0].data().to_vec()
        };
        let (g0, g1, both) = (grad(&[0]), grad(&[1]), grad(&[0, 1]));
        for k in 0..9 {
            let sum = g0[k] + g1[k];
            prop_assert!((both[k] - sum).abs() <= 1e-12 * (1.0 + sum.abs()));
        }
    }

    #[test]
    fn edge_conv_ignores_neighbor_order(seed in any::<u64>()) {
        let chamber = ChamberSpec::default();
        let config = NetworkConfig { widths: vec![8, 8], ..Default::default() };
        let engine = Engine::with_random_head(EngineKind::Compensator, config, &chamber, seed).unwrap();
        let mut r = rng(seed);
        let n = 8;
        let mut lists: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && r.gen_bool(0.5)).chain([(i + 1) % n]).collect())
            .collect();
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        let x: Vec<f64> = random_cloud(&mut r, n, 40.0).iter().flat_map(|p| [p.x + 190.0, p.y + 142.0, p.z + 190.0]).collect();
        let run = |lists: &[Vec<usize>]| {
            let mut t = Tape::new();
            let vars = t.params(&engine.params);
            let xv = t.constant(Tensor::matrix(n, 3, x.clone()).unwrap());
            let y = engine.record(&mut t, xv, &Arc::new(Adjacency::new(lists).unwrap()), &vars).unwrap();
            t.value(y).data().to_vec()
        };
        let base = run(&lists);
        let mut shuffled = lists.clone();
        for l in &mut shuffled {
            l.shuffle(&mut r);
        }
        for (a, b) in base.iter().zip(run(&shuffled)) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}

/// Closest point on triangle `abc` to `p`.
fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resampled_points_lie_on_the_surface(seed in any::<u64>(), k in 1usize..300) {
        let mut r = rng(seed);
        let vertices = random_cloud(&mut r, 9, 30.0);
        let faces = vec![[0, 1, 2], [3, 4, 5], [6, 7, 8], [0, 4, 8]];
        let Ok(mesh) = TriangleMesh::new(vertices, faces) else { return Ok(()) };
        let cloud = resample_uniform(&mesh, k, seed).unwrap();
        prop_assert_eq!(cloud.len(), k);
        for p in cloud.iter() {
            let d = (0..mesh.faces().len())
                .map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    (closest_on_triangle(p, &a, &b, &c) - p).norm()
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(d <= 1e-9, "{d}");
        }
    }

    #[test]
    fn correspondences_land_on_scan_points(seed in any::<u64>(), n in 1usize..80, m in 1usize..80) {
        let mut r = rng(seed);
        let cad = PointCloud::new(random_cloud(&mut r, n, 100.0)).unwrap();
        let scan = PointCloud::new(random_cloud(&mut r, m, 100.0)).unwrap();
        let c = correspond(&cad, &scan).unwrap();
        prop_assert_eq!(c.len(), n);
        prop_assert_eq!(c.sparse_scan, m < n);
        for (&(i, j), d) in c.pairs.iter().zip(&c.displacements) {
            let landed = cad.points()[i] + d;
            // Equal up to the rounding of one subtraction and one addition.
            prop_assert!((landed - scan.points()[j]).norm() <= 1e-12 * 100.0);
            let best = scan.iter().map(|s| (s - cad.points()[i]).norm()).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(d.norm(), best);
        }
    }

    #[test]
    fn improvement_is_zero_at_baseline_and_strictly_decreasing(
        base in 1e-3f64..10.0, a in 0.0f64..10.0, b in 0.0f64..10.0,
    ) {
        prop_assert_eq!(improvement(base, base).unwrap(), 0.0);
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(improvement(base, lo).unwrap() > improvement(base, hi).unwrap());
    }

    #[test]
    fn noiseless_print_is_undone_by_subtracting_the_warp(seed in any::<u64>()) {
        let spec = WarpSpec::default().noiseless();
        let mut r = rng(seed);
        let cad: Vec<Vec3> = (0..50)
            .map(|_| Vec3::new(r.gen_range(0.0..380.0), r.gen_range(0.0..284.0), r.gen_range(0.0..380.0)))
            .collect();
        let cad = PointCloud::new(cad).unwrap();
        let scan = simulate_print(&cad, &spec).unwrap();
        for (c, s) in cad.iter().zip(scan.iter()) {
            let back = s - warp_displacement(c, &spec).unwrap();
            prop_assert!((back - c).norm() <= 1e-12 * c.norm());
        }
    }

    #[test]
    fn warp_grows_with_distance_from_the_center(
        m1 in -2i32..=2, y1 in 20.0f64..264.0, z1 in 20.0f64..360.0,
        m2 in -2i32..=2, y2 in 20.0f64..264.0, z2 in 20.0f64..360.0,
    ) {
        // A grid symmetric about its centroid, moved by whole half-wavelengths
        // along x so every copy sees the same in-part phase.
        let spec = WarpSpec::default().noiseless();
        let grid: Vec<Vec3> = (-5..=5)
            .flat_map(|i| (-1..=1).flat_map(move |j| (-1..=1).map(move |k| Vec3::new(i as f64 * 10.0, j as f64 * 6.0, k as f64 * 3.0))))
            .collect();
        let c = spec.chamber.center();
        let abs_mean = |m: i32, y: f64, z: f64| {
            let t = Vec3::new(c.x + m as f64 * spec.wavelength / 2.0, y, z);
            let d: f64 = grid.iter().map(|q| warp_displacement(&(q + t), &spec).unwrap().norm()).sum();
            (spec.radius_squared(&t), d / grid.len() as f64)
        };
        let (r1, a1) = abs_mean(m1, y1, z1);
        let (r2, a2) = abs_mean(m2, y2, z2);
        if r1 <= r2 {
            prop_assert!(a1 <= a2 * (1.0 + 1e-12));
        } else {
            prop_assert!(a2 <= a1 * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn remeshed_cuboids_are_connected_covering_and_deterministic(
        sx in 4.0f64..20.0, sy in 4.0f64..20.0, sz in 4.0f64..20.0,
        voxel in 1.5f64..3.0, seed in any::<u64>(),
    ) {
        let mesh = TriangleMesh::cuboid(Vec3::new(sx, sy, sz));
        let graph = remesh(&mesh, voxel, seed).unwrap();
        prop_assert!(graph.is_connected());
        let surface = surface_voxels(&voxelize(&mesh, voxel).unwrap()).unwrap();
        prop_assert!(graph.len() as f64 >= 0.9 * surface.len() as f64);
        let index = SpatialIndex::new(&graph.cloud().unwrap());
        for &cell in surface.cells() {
            let (_, d) = index.nearest(&surface.center(cell)).unwrap();
            prop_assert!(d <= 3f64.sqrt() * voxel);
        }
        prop_assert_eq!(remesh(&mesh, voxel, seed).unwrap(), graph);
    }

    #[test]
    fn icp_ignores_point_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cad = random_cloud(&mut r, 60, 20.0);
        let axis = Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let motion = Placement::from_axis_angle(axis, r.gen_range(-0.2..0.2), Vec3::new(1.0, -2.0, 0.5)).unwrap();
        let scan: Vec<Vec3> = cad.iter().map(|p| motion.apply(p)).collect();
        let mut order: Vec<usize> = (0..60).collect();
        order.shuffle(&mut r);
        let permute = |v: &[Vec3]| PointCloud::new(order.iter().map(|&i| v[i]).collect()).unwrap();
        let (cad_c, scan_c) = (PointCloud::new(cad.clone()).unwrap(), PointCloud::new(scan.clone()).unwrap());
        let a = icp_align(&scan_c, &cad_c, 50, 1e-12).unwrap();
        let b = icp_align(&permute(&scan), &permute(&cad), 50, 1e-12).unwrap();
        for p in &scan {
            prop_assert!((a.placement.apply(p) - b.placement.apply(p)).norm() <= 1e-6);
        }
    }
}
