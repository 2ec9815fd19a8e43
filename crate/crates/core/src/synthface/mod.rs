//! Synthetic face-patch generator with exact ground truth.
//!
//! A scene is a handful of continuous parameters (head pose, eye-in-head gaze
//! offset, identity, lighting, occlusion). The renderer draws a stylized face
//! whose iris position composes head pose and gaze the same way the label
//! does, so appearance and ground truth can never drift apart: the
//! eye-contact label is recomputed from the parameters, not stored.

mod generate;

pub use generate::{
    generate_dataset, generate_session, landmark_available, summarize, DatasetSummary,
    GeneratorConfig, SynthSample,
};

use crate::imaging::{FacePatch, Point2};
use crate::numerics::Rng;

/// Everything that determines one rendered frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    /// Head yaw in degrees; positive turns the face toward its left, which
    /// shifts features toward the right of the image.
    pub yaw: f64,
    /// Head pitch in degrees; positive tilts up.
    pub pitch: f64,
    /// In-plane rotation in degrees, clockwise in image coordinates.
    pub roll: f64,
    /// Horizontal eye-in-head gaze offset in degrees.
    pub gaze_azimuth: f64,
    /// Vertical eye-in-head gaze offset in degrees.
    pub gaze_elevation: f64,
    /// Identity seed: skin tone, proportions and iris shade derive from it.
    pub identity: u64,
    /// Brightness multiplier, roughly 0.6 to 1.4.
    pub illumination: f64,
    /// Fraction of the patch hidden by a foreground object, in [0, 1).
    pub occlusion: f64,
    /// Seed for per-pixel sensor noise.
    pub noise_seed: u64,
    /// Square patch side length in pixels.
    pub size: usize,
}

impl SceneParams {
    /// Total horizontal gaze direction relative to the camera, in degrees.
    pub fn camera_azimuth(&self) -> f64 {
        self.yaw + self.gaze_azimuth
    }

    /// Total vertical gaze direction relative to the camera, in degrees.
    pub fn camera_elevation(&self) -> f64 {
        self.pitch + self.gaze_elevation
    }

    /// Angle between the gaze ray and the camera axis, in degrees.
    pub fn contact_angle(&self) -> f64 {
        let az = self.camera_azimuth().to_radians();
        let el = self.camera_elevation().to_radians();
        (el.cos() * az.cos()).clamp(-1.0, 1.0).acos().to_degrees()
    }

    /// Ground-truth eye contact at the given angular threshold.
    pub fn eye_contact(&self, threshold_deg: f64) -> bool {
        self.contact_angle() <= threshold_deg
    }
}

/// Stable per-identity appearance parameters in [0, 1).
struct Identity {
    skin: [f64; 3],
    eye_spacing: f64,
    head_width: f64,
    head_height: f64,
    iris_shade: f64,
}

impl Identity {
    fn from_seed(seed: u64) -> Self {
        let h = |salt: u64| -> f64 {
            let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z = z ^ (z >> 31);
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        Identity {
            skin: [
                170.0 + 60.0 * h(1),
                130.0 + 60.0 * h(2),
                100.0 + 55.0 * h(3),
            ],
            eye_spacing: 0.92 + 0.16 * h(4),
            head_width: 0.95 + 0.10 * h(5),
            head_height: 0.95 + 0.10 * h(6),
            iris_shade: h(7),
        }
    }
}

/// Soft-edged membership of a point in an axis-aligned ellipse: 1 inside,
/// 0 outside, with a ~1px linear ramp so sub-pixel motion stays visible.
fn ellipse_coverage(dx: f64, dy: f64, rx: f64, ry: f64) -> f64 {
    let d = ((dx / rx) * (dx / rx) + (dy / ry) * (dy / ry)).sqrt();
    // Convert the normalized distance back to an approximate pixel distance
    // using the smaller radius so edge softness is isotropic-ish.
    let edge = rx.min(ry);
    ((1.0 - d) * edge + 0.5).clamp(0.0, 1.0)
}

fn mix(base: [f64; 3], paint: [f64; 3], coverage: f64) -> [f64; 3] {
    [
        base[0] + (paint[0] - base[0]) * coverage,
        base[1] + (paint[1] - base[1]) * coverage,
        base[2] + (paint[2] - base[2]) * coverage,
    ]
}

/// Renders a scene into an RGB patch. Returns the patch and the (left, right)
/// eye centers in image coordinates, left meaning leftmost in the image.
/// With `roll = 0` the face is upright; a nonzero roll rotates the whole
/// scene about the patch center by `[cos -sin; sin cos]` (y pointing down),
/// which `align_eyes` undoes when handed the same angle.
pub fn render_face(scene: &SceneParams) -> (FacePatch, Point2, Point2) {
    let s = scene.size as f64;
    let id = Identity::from_seed(scene.identity);
    let yaw = scene.yaw.to_radians();
    let pitch = scene.pitch.to_radians();
    let az = scene.camera_azimuth().to_radians();
    let el = scene.camera_elevation().to_radians();

    let center = (s * 0.5, s * 0.5);
    // Upright-frame layout. The head shifts a little with pose so the
    // background silhouette also carries pose information.
    let head = (center.0 + s * 0.05 * yaw.sin(), center.1 + s * 0.04 * pitch.sin());
    let head_rx = s * 0.40 * id.head_width;
    let head_ry = s * 0.46 * id.head_height;

    // Eye centers: spacing foreshortens with yaw while the whole eye line
    // slides the way a turning head moves its features across the image.
    let eye_dx = s * 0.16 * id.eye_spacing * yaw.cos();
    let eye_shift = s * 0.10 * yaw.sin();
    let eye_y = center.1 - s * 0.10 + s * 0.07 * pitch.sin();
    let eyes_upright = [
        (center.0 - eye_dx + eye_shift, eye_y),
        (center.0 + eye_dx + eye_shift, eye_y),
    ];

    // Aperture half-axes shrink as the head turns away.
    let aperture_rx = s * 0.100 * id.eye_spacing * yaw.cos().max(0.30);
    let aperture_ry = s * 0.058 * pitch.cos().max(0.50);

    // Iris offset inside the aperture: mostly the camera-relative gaze
    // direction, plus a pose-proportional term from aperture foreshortening.
    // The gaze term saturates ~20 degrees off-axis so the full usable range
    // of eye appearance spans the aperture; beyond that the iris just sits
    // at the lid. The pose term makes the appearance of contact depend on
    // head pose, so a single frontal template cannot explain every pose.
    let span = 20.0_f64.to_radians().sin();
    let iris_dx = (aperture_rx
        * (0.62 * (az.sin() / span).clamp(-1.0, 1.0) + 0.25 * yaw.sin()))
    .clamp(-0.85 * aperture_rx, 0.85 * aperture_rx);
    let iris_dy = (aperture_ry
        * (0.62 * (el.sin() / span).clamp(-1.0, 1.0) + 0.25 * pitch.sin()))
    .clamp(-0.85 * aperture_ry, 0.85 * aperture_ry);
    let iris_r = aperture_ry * 0.62;

    let nose = (center.0 + s * 0.12 * yaw.sin(), center.1 + s * 0.05 + s * 0.05 * pitch.sin());
    let mouth = (center.0 + s * 0.10 * yaw.sin(), center.1 + s * 0.24 + s * 0.06 * pitch.sin());
    let brow_y = eye_y - s * 0.065;

    let sclera = [235.0, 233.0, 228.0];
    let iris_color = [50.0 + 60.0 * id.iris_shade, 40.0 + 50.0 * id.iris_shade, 35.0];
    let pupil = [18.0, 16.0, 16.0];
    let brow = [70.0, 55.0, 45.0];
    let mouth_color = [150.0, 70.0, 70.0];
    let background = [46.0, 48.0, 52.0];

    let roll = scene.roll.to_radians();
    let (cr, sr) = (roll.cos(), roll.sin());
    let mut noise = Rng::new(scene.noise_seed);
    let occlusion_top = s * (1.0 - 0.45 * scene.occlusion.clamp(0.0, 1.0));

    let mut patch = FacePatch::filled(scene.size, scene.size, 3, 0).unwrap();
    for y in 0..scene.size {
        for x in 0..scene.size {
            // Inverse roll: find the upright-frame point this pixel shows.
            let px = x as f64 - center.0;
            let py = y as f64 - center.1;
            let ux = center.0 + cr * px + sr * py;
            let uy = center.1 - sr * px + cr * py;

            let head_cov = ellipse_coverage(ux - head.0, uy - head.1, head_rx, head_ry);
            let shading = 1.0 - 0.12 * (uy - head.1) / head_ry;
            let skin = [id.skin[0] * shading, id.skin[1] * shading, id.skin[2] * shading];
            let mut color = mix(background, skin, head_cov);

            if head_cov > 0.0 {
                for eye in eyes_upright {
                    let ap =
                        ellipse_coverage(ux - eye.0, uy - eye.1, aperture_rx, aperture_ry);
                    if ap > 0.0 {
                        color = mix(color, sclera, ap * head_cov);
                        let ix = eye.0 + iris_dx;
                        let iy = eye.1 + iris_dy;
                        let ic = ellipse_coverage(ux - ix, uy - iy, iris_r, iris_r);
                        // The iris only shows through the aperture.
                        let ic = ic * ap;
                        if ic > 0.0 {
                            color = mix(color, iris_color, ic);
                            let pc = ellipse_coverage(ux - ix, uy - iy, iris_r * 0.45, iris_r * 0.45)
                                * ap;
                            color = mix(color, pupil, pc);
                        }
                    }
                    let bc = ellipse_coverage(
                        ux - eye.0,
                        uy - brow_y,
                        aperture_rx * 1.25,
                        aperture_ry * 0.45,
                    );
                    color = mix(color, brow, bc * head_cov * 0.8);
                }
                let nc = ellipse_coverage(ux - nose.0, uy - nose.1, s * 0.045, s * 0.075);
                color = mix(
                    color,
                    [skin[0] * 0.82, skin[1] * 0.82, skin[2] * 0.82],
                    nc * head_cov,
                );
                let mc = ellipse_coverage(ux - mouth.0, uy - mouth.1, s * 0.12, s * 0.035);
                color = mix(color, mouth_color, mc * head_cov);
            }

            // Occlusion band rises from the bottom of the *output* frame, the
            // way a hand or toy crosses in front of the camera.
            if (y as f64) >= occlusion_top {
                color = mix(color, [28.0, 26.0, 30.0], 0.94);
            }

            for (c, value) in color.iter().enumerate() {
                let lit = value * scene.illumination;
                let noisy = lit + noise.range_f64(-6.0, 6.0);
                patch.set(x, y, c, noisy.round().clamp(0.0, 255.0) as u8);
            }
        }
    }

    // Report eye centers in the rolled output frame: forward rotation of the
    // upright positions about the patch center.
    let to_output = |p: (f64, f64)| {
        let dx = p.0 - center.0;
        let dy = p.1 - center.1;
        Point2::new(center.0 + cr * dx - sr * dy, center.1 + sr * dx + cr * dy)
    };
    let left = to_output(eyes_upright[0]);
    let right = to_output(eyes_upright[1]);
    (patch, left, right)
}
