#include "retrace/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace retrace {

namespace {

constexpr double kEeInvMass = 1.0;
constexpr double kBoxInvMass = 3.0;      // movable boxes yield more than the EE
constexpr double kLidInvInertia = 2400.0;

struct Vec2 {
    double x = 0, y = 0;
};
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Convex polygon with vertices CCW, expressed relative to a reference point.
struct Poly {
    Vec2 v[4];
    int n = 4;
    int obj = -1;                       // owning object index, -1 for none
    bool movable = false;
    bool hinged = false;
    Vec2 hinge;                         // relative to the same reference
    std::array<std::uint8_t, 3> color{};
    double friction = 0.6;
};

Poly make_rect(Vec2 center, double hw, double hh, double c, double s) {
    Poly p;
    const Vec2 ex{c * hw, s * hw}, ey{-s * hh, c * hh};
    p.v[0] = center - ex - ey;
    p.v[1] = center + ex - ey;
    p.v[2] = center + ex + ey;
    p.v[3] = center - ex + ey;
    return p;
}

// Object polygons relative to (rx, ry).  disp/dangle are intra-tick offsets
// accumulated by the contact solver before poses are committed.
void object_polys(const SceneObject& o, int index, double rx, double ry, Vec2 disp,
                  double dangle, std::vector<Poly>& out) {
    const Vec2 rel{o.pose.x - rx + disp.x, o.pose.y - ry + disp.y};
    const double c = std::cos(o.pose.theta), s = std::sin(o.pose.theta);
    auto local = [&](double lx, double ly) { return rel + Vec2{c * lx - s * ly, s * lx + c * ly}; };
    auto push = [&](Poly p) {
        p.obj = index;
        p.movable = o.movable;
        p.color = o.color;
        p.friction = o.friction_coeff;
        out.push_back(p);
    };
    switch (o.shape) {
        case ShapeKind::Box:
            push(make_rect(rel, o.half_w, o.half_h, c, s));
            break;
        case ShapeKind::Socket: {
            const double mid_wall = -o.wall_depth * 0.5;
            const double wall_hw = (o.socket_half_w - o.slot_half_w) * 0.5;
            const double wall_cx = (o.socket_half_w + o.slot_half_w) * 0.5;
            push(make_rect(local(-wall_cx, mid_wall), wall_hw, o.wall_depth * 0.5, c, s));
            push(make_rect(local(wall_cx, mid_wall), wall_hw, o.wall_depth * 0.5, c, s));
            push(make_rect(local(0.0, -o.wall_depth - o.base_thickness * 0.5), o.socket_half_w,
                           o.base_thickness * 0.5, c, s));
            break;
        }
        case ShapeKind::Lid: {
            push(make_rect(rel, o.half_w, o.half_h, c, s));
            const Vec2 hinge = local(-o.half_w, o.half_h + o.hinge_lift);
            const double a = o.pose.theta + o.hinge_angle + dangle;
            const double ca = std::cos(a), sa = std::sin(a);
            Poly plate = make_rect(hinge + Vec2{ca * o.lid_len * 0.5, sa * o.lid_len * 0.5},
                                   o.lid_len * 0.5, o.lid_thick * 0.5, ca, sa);
            plate.hinged = true;
            plate.hinge = hinge;
            // brighter plate so articulation reads in the image
            Poly& ref = plate;
            ref.color = {static_cast<std::uint8_t>(std::min(255, o.color[0] + 60)),
                         static_cast<std::uint8_t>(std::min(255, o.color[1] + 60)),
                         static_cast<std::uint8_t>(std::min(255, o.color[2] + 60))};
            push(ref);
            break;
        }
    }
}

bool point_in_poly(Vec2 p, const Poly& poly) {
    for (int i = 0; i < poly.n; ++i) {
        Vec2 a = poly.v[i], b = poly.v[(i + 1) % poly.n];
        if (cross(b - a, p - a) < 0.0) return false;
    }
    return true;
}

Vec2 closest_on_segment(Vec2 p, Vec2 a, Vec2 b) {
    Vec2 ab = b - a;
    double t = dot(p - a, ab) / dot(ab, ab);
    t = std::clamp(t, 0.0, 1.0);
    return a + ab * t;
}

struct ContactInfo {
    bool hit = false;
    double depth = 0.0;
    Vec2 normal;  // direction to push the circle
    Vec2 point;   // contact point on the circle surface
};

ContactInfo circle_vs_poly(Vec2 c, double r, const Poly& poly) {
    ContactInfo out;
    Vec2 best{};
    double best_d2 = 1e300;
    for (int i = 0; i < poly.n; ++i) {
        Vec2 q = closest_on_segment(c, poly.v[i], poly.v[(i + 1) % poly.n]);
        double d2 = dot(q - c, q - c);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = q;
        }
    }
    double d = std::sqrt(best_d2);
    if (point_in_poly(c, poly)) {
        out.hit = true;
        out.depth = d + r;
        out.normal = d > 1e-12 ? (best - c) * (1.0 / d) : Vec2{0, 1};
        out.point = best;
        return out;
    }
    if (d < r) {
        out.hit = true;
        out.depth = r - d;
        out.normal = d > 1e-12 ? (c - best) * (1.0 / d) : Vec2{0, 1};
        out.point = best;
    }
    return out;
}

struct ContactAccum {
    Vec2 normal;
    Vec2 rel;      // contact point relative to EE center
    double lambda = 0.0;
    double friction = 0.6;
    int obj = -1;
    bool movable = false;
    bool hinged = false;
    Vec2 hinge;
};

}  // namespace

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

ForceReading step_delta(World& w, const Pose& delta_ee_frame, bool gripper_cmd) {
    const SimConfig& cfg = w.cfg;
    const double h = cfg.tick_dt / cfg.substeps;
    const double inv_i = 1.0 / cfg.rot_inertia;

    // Clamp the commanded delta (safety clamp on per-tick motion).
    Pose d = delta_ee_frame;
    double dn = std::hypot(d.x, d.y);
    if (dn > cfg.max_step_per_tick) {
        d.x *= cfg.max_step_per_tick / dn;
        d.y *= cfg.max_step_per_tick / dn;
    }
    d.theta = std::clamp(d.theta, -cfg.max_rot_per_tick, cfg.max_rot_per_tick);

    // Gripper transition at tick start.
    if (gripper_cmd && !w.gripper_closed) {
        int best = -1;
        double best_d = cfg.grasp_radius;
        for (std::size_t i = 0; i < w.objects.size(); ++i) {
            if (!w.objects[i].movable) continue;
            double dist = translation_distance(w.objects[i].pose, w.ee_pose);
            if (dist <= best_d) {
                best_d = dist;
                best = static_cast<int>(i);
            }
        }
        if (best >= 0) {
            w.attached_object = best;
            w.attach_rel = relative(w.ee_pose, w.objects[best].pose);
        }
    } else if (!gripper_cmd && w.gripper_closed) {
        w.attached_object = -1;
    }
    w.gripper_closed = gripper_cmd;

    // Tick-local frame anchored at the EE's committed position: every
    // absolute coordinate enters only as a difference of grid values.
    const double ee0x = w.ee_pose.x, ee0y = w.ee_pose.y;
    const double c0 = std::cos(w.ee_pose.theta), s0 = std::sin(w.ee_pose.theta);
    const Vec2 target{c0 * d.x - s0 * d.y, s0 * d.x + c0 * d.y};
    const double target_th = w.ee_pose.theta + d.theta;

    Vec2 p{0, 0};
    double th = w.ee_pose.theta;
    Vec2 vel{w.ee_vx, w.ee_vy};
    double vth = w.ee_vth;

    std::vector<Vec2> disp(w.objects.size(), Vec2{});
    std::vector<double> dangle(w.objects.size(), 0.0);

    const double ct = 2.0 * std::sqrt(cfg.k_trans);
    const double cr = 2.0 * std::sqrt(cfg.k_rot);
    const double den_t = 1.0 + h * ct + h * h * cfg.k_trans;
    const double den_r = 1.0 + h * cr + h * h * cfg.k_rot;

    Vec2 force_imp{};
    double torque_imp = 0.0;

    std::vector<Poly> polys;
    std::vector<ContactAccum> contacts;

    for (int sub = 0; sub < cfg.substeps; ++sub) {
        vel.x = (vel.x + h * cfg.k_trans * (target.x - p.x)) / den_t;
        vel.y = (vel.y + h * cfg.k_trans * (target.y - p.y)) / den_t;
        vth = (vth + h * cfg.k_rot * (target_th - th)) / den_r;
        p = p + vel * h;
        th += vth * h;

        polys.clear();
        for (std::size_t i = 0; i < w.objects.size(); ++i) {
            if (static_cast<int>(i) == w.attached_object) continue;
            object_polys(w.objects[i], static_cast<int>(i), ee0x, ee0y, disp[i], dangle[i], polys);
        }

        contacts.clear();
        for (int iter = 0; iter < cfg.contact_iters; ++iter) {
            bool any = false;
            for (const Circle& circ : w.ee_body) {
                const double cc = std::cos(th), ss = std::sin(th);
                Vec2 center = p + Vec2{cc * circ.lx - ss * circ.ly, ss * circ.lx + cc * circ.ly};
                for (std::size_t pi = 0; pi < polys.size(); ++pi) {
                    // copy: polys is rebuilt below when an object moves
                    const Poly poly = polys[pi];
                    ContactInfo ci = circle_vs_poly(center, circ.r, poly);
                    if (!ci.hit) continue;
                    any = true;
                    Vec2 r_arm = ci.point - p;
                    double cr_n = cross(r_arm, ci.normal);
                    double w_ee = kEeInvMass + cr_n * cr_n * inv_i;
                    double w_obj = 0.0;
                    double cr_lid = 0.0;
                    if (poly.movable) w_obj = kBoxInvMass;
                    if (poly.hinged) {
                        Vec2 arm = ci.point - poly.hinge;
                        cr_lid = cross(arm, ci.normal);
                        w_obj = cr_lid * cr_lid * kLidInvInertia;
                    }
                    double lam = ci.depth / (w_ee + w_obj);
                    p = p + ci.normal * (lam * kEeInvMass);
                    th += lam * cr_n * inv_i;
                    if (poly.movable) {
                        disp[poly.obj] = disp[poly.obj] - ci.normal * (lam * kBoxInvMass);
                    }
                    if (poly.hinged) {
                        double da = -lam * cr_lid * kLidInvInertia;
                        const SceneObject& o = w.objects[poly.obj];
                        double na = std::clamp(o.hinge_angle + dangle[poly.obj] + da, 0.0, o.hinge_max);
                        dangle[poly.obj] = na - o.hinge_angle;
                    }
                    // fold into the per-pair accumulator for friction/forces
                    bool found = false;
                    for (auto& acc : contacts) {
                        if (acc.obj == poly.obj && dot(acc.normal, ci.normal) > 0.9) {
                            acc.lambda += lam;
                            acc.normal = ci.normal;
                            acc.rel = r_arm;
                            found = true;
                            break;
                        }
                    }
                    if (!found) {
                        ContactAccum acc;
                        acc.normal = ci.normal;
                        acc.rel = r_arm;
                        acc.lambda = lam;
                        acc.friction = poly.friction;
                        acc.obj = poly.obj;
                        acc.movable = poly.movable;
                        acc.hinged = poly.hinged;
                        acc.hinge = poly.hinge;
                        contacts.push_back(acc);
                    }
                    // moved objects need fresh polygons within this iteration
                    if (poly.movable || poly.hinged) {
                        polys.clear();
                        for (std::size_t i = 0; i < w.objects.size(); ++i) {
                            if (static_cast<int>(i) == w.attached_object) continue;
                            object_polys(w.objects[i], static_cast<int>(i), ee0x, ee0y, disp[i],
                                         dangle[i], polys);
                        }
                        break;  // restart circle loop against fresh polys
                    }
                }
            }
            if (!any) break;
        }

        // Velocity response: inelastic normal + Coulomb friction per contact.
        for (const auto& acc : contacts) {
            Vec2 n = acc.normal;
            Vec2 t{-n.y, n.x};
            double cr_n = cross(acc.rel, n);
            double cr_t = cross(acc.rel, t);
            double w_n = kEeInvMass + cr_n * cr_n * inv_i;
            double w_t = kEeInvMass + cr_t * cr_t * inv_i;
            double vn = dot(vel, n) + vth * cr_n;
            double pn = 0.0;
            if (vn < 0.0) {
                pn = -vn / w_n;
                vel = vel + n * (pn * kEeInvMass);
                vth += pn * cr_n * inv_i;
            }
            double support = acc.lambda / (h * (w_n));
            double vt = dot(vel, t) + vth * cr_t;
            double pt_needed = -vt / w_t;
            double cap = acc.friction * (support + pn);
            double pt = std::clamp(pt_needed, -cap, cap);
            vel = vel + t * (pt * kEeInvMass);
            vth += pt * cr_t * inv_i;
            force_imp = force_imp + n * (support + pn) + t * pt;
            torque_imp += cr_n * (support + pn) + cr_t * pt;
        }
    }

    // Commit through the position grid so world coordinates stay exact.
    w.ee_pose.x = ee0x + snap_to_grid(p.x);
    w.ee_pose.y = ee0y + snap_to_grid(p.y);
    w.ee_pose.theta = wrap_angle(th);
    w.ee_vx = vel.x;
    w.ee_vy = vel.y;
    w.ee_vth = vth;
    w.ee_target = Pose{ee0x + snap_to_grid(target.x), ee0y + snap_to_grid(target.y),
                       wrap_angle(target_th)};
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
        if (static_cast<int>(i) == w.attached_object) continue;
        if (disp[i].x != 0.0 || disp[i].y != 0.0) {
            w.objects[i].pose.x += snap_to_grid(disp[i].x);
            w.objects[i].pose.y += snap_to_grid(disp[i].y);
        }
        if (dangle[i] != 0.0) {
            w.objects[i].hinge_angle =
                std::clamp(w.objects[i].hinge_angle + dangle[i], 0.0, w.objects[i].hinge_max);
        }
    }
    if (w.attached_object >= 0) {
        SceneObject& o = w.objects[w.attached_object];
        double c = std::cos(w.ee_pose.theta), s = std::sin(w.ee_pose.theta);
        o.pose.x = w.ee_pose.x + snap_to_grid(c * w.attach_rel.x - s * w.attach_rel.y);
        o.pose.y = w.ee_pose.y + snap_to_grid(s * w.attach_rel.x + c * w.attach_rel.y);
        o.pose.theta = wrap_angle(w.ee_pose.theta + w.attach_rel.theta);
    }
    w.time += cfg.tick_dt;

    // Average impulse over the tick, expressed in the EE frame.
    Vec2 f = force_imp * (1.0 / cfg.tick_dt);
    double tq = torque_imp / cfg.tick_dt;
    const double ce = std::cos(w.ee_pose.theta), se = std::sin(w.ee_pose.theta);
    ForceReading fr;
    fr.fx = std::clamp(ce * f.x + se * f.y, -cfg.max_force, cfg.max_force);
    fr.fy = std::clamp(-se * f.x + ce * f.y, -cfg.max_force, cfg.max_force);
    fr.torque = std::clamp(tq, -cfg.max_force * 0.1, cfg.max_force * 0.1);
    w.last_force = fr;
    return fr;
}

ForceReading step_to(World& w, const Pose& target, bool gripper_cmd) {
    // Difference-first so the delta depends only on relative geometry.
    Pose delta = relative(w.ee_pose, target);
    return step_delta(w, delta, gripper_cmd);
}

std::pair<World, ForceReading> step(const World& w, const Pose& target, bool gripper_cmd,
                                    double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
    World out = w;
    int ticks = std::max(1, static_cast<int>(std::llround(dt / w.cfg.tick_dt)));
    ForceReading fr;
    for (int i = 0; i < ticks; ++i) fr = step_to(out, target, gripper_cmd);
    return {out, fr};
}

ForceReading read_force(const World& w) { return w.last_force; }

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

Image render(const World& w, std::optional<std::uint64_t> noise_seed) {
    const int s = w.cfg.image_size;
    Image img(s, s);
    const double view = w.cfg.view_half;
    const double px = 2.0 * view / s;

    std::vector<Poly> polys;
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
        object_polys(w.objects[i], static_cast<int>(i), w.ee_pose.x, w.ee_pose.y, Vec2{}, 0.0,
                     polys);
    }
    // world-relative -> EE frame
    const double c = std::cos(w.ee_pose.theta), sn = std::sin(w.ee_pose.theta);
    for (auto& poly : polys) {
        for (int i = 0; i < poly.n; ++i) {
            Vec2 v = poly.v[i];
            poly.v[i] = {c * v.x + sn * v.y, -sn * v.x + c * v.y};
        }
    }

    const std::array<std::uint8_t, 3> bg{38, 38, 46};
    for (int row = 0; row < s; ++row) {
        for (int col = 0; col < s; ++col) {
            Vec2 pt{-view + (col + 0.5) * px, view - (row + 0.5) * px};
            const std::array<std::uint8_t, 3>* color = &bg;
            for (const auto& poly : polys) {
                if (point_in_poly(pt, poly)) color = &poly.color;
            }
            for (int ch = 0; ch < 3; ++ch) img.at(row, col, ch) = (*color)[ch];
        }
    }

    if (noise_seed) {
        Rng rng(*noise_seed);
        const double sigma = w.cfg.render_noise_sigma;
        for (auto& b : img.data) {
            double v = b / 255.0 + sigma * rng.normal();
            b = quantize_intensity(v);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Reset / scenarios
// ---------------------------------------------------------------------------

namespace {

Pose snapped(double x, double y, double th = 0.0) {
    return {snap_to_grid(x), snap_to_grid(y), wrap_angle(th)};
}

Scenario make_reach() {
    Scenario s;
    s.id = "reach";
    s.ee_body = {Circle{0, 0, 0.008}};
    SceneObject marker;
    marker.shape = ShapeKind::Box;
    marker.pose = snapped(0.0, 0.0);
    marker.half_w = 0.012;
    marker.half_h = 0.008;
    marker.color = {204, 64, 160};
    SceneObject dot;
    dot.shape = ShapeKind::Box;
    dot.pose = snapped(0.018, 0.010);
    dot.half_w = 0.004;
    dot.half_h = 0.004;
    dot.color = {64, 200, 200};
    s.objects = {marker, dot};
    s.ee_start = snapped(0.0, 0.060);
    for (int i = 1; i <= 8; ++i) s.script.push_back(snapped(0.0, 0.060 - 0.00525 * i));
    s.settle_ticks = 2;
    s.success = SuccessKind::ReachGoal;
    s.goal_object = 0;
    s.goal_offset = snapped(0.0, 0.018);
    return s;
}

Scenario make_peg() {
    Scenario s;
    s.id = "peg";
    s.ee_body = {Circle{0, 0, 0.006}, Circle{0, -0.010, 0.006}, Circle{0, -0.020, 0.006}};
    SceneObject socket;
    socket.shape = ShapeKind::Socket;
    socket.pose = snapped(0.0, -0.020);
    socket.friction_coeff = 0.8;
    socket.color = {110, 120, 156};
    SceneObject tab;
    tab.shape = ShapeKind::Box;
    tab.pose = snapped(0.016, -0.016);
    tab.half_w = 0.003;
    tab.half_h = 0.003;
    tab.color = {90, 190, 90};
    s.objects = {socket, tab};
    s.ee_start = snapped(0.0, 0.030);
    for (int i = 1; i <= 8; ++i) s.script.push_back(snapped(0.0, 0.030 - 0.006 * i));
    s.settle_ticks = 2;
    s.success = SuccessKind::PegInserted;
    s.goal_object = 0;
    return s;
}

Scenario make_push() {
    Scenario s;
    s.id = "push-block";
    s.ee_body = {Circle{0, 0, 0.008}};
    SceneObject block;
    block.shape = ShapeKind::Box;
    block.pose = snapped(0.0, 0.014);
    block.movable = true;
    block.friction_coeff = 0.5;
    block.half_w = 0.014;
    block.half_h = 0.014;
    block.color = {230, 140, 40};
    SceneObject pad;
    pad.shape = ShapeKind::Box;
    pad.pose = snapped(0.0, 0.055);
    pad.half_w = 0.015;
    pad.half_h = 0.003;
    pad.color = {60, 180, 90};
    s.objects = {block, pad};
    s.ee_start = snapped(0.0, -0.0625);
    const double free_wps[] = {-0.0525, -0.0425, -0.0325, -0.0225, -0.0125};
    for (double y : free_wps) s.script.push_back(snapped(0.0, y));
    const double push_wps[] = {-0.0055, 0.0015, 0.0085};
    for (double y : push_wps) s.script.push_back(snapped(0.0, y));
    s.settle_ticks = 2;
    s.success = SuccessKind::BlockAtGoal;
    s.goal_object = 1;
    return s;
}

Scenario make_lid() {
    Scenario s;
    s.id = "lid";
    s.ee_body = {Circle{0, 0, 0.008}};
    SceneObject box;
    box.shape = ShapeKind::Lid;
    box.pose = snapped(-0.010, -0.035);
    box.half_w = 0.028;
    box.half_h = 0.014;
    box.hinge_lift = 0.006;
    box.lid_len = 0.062;
    box.lid_thick = 0.006;
    box.friction_coeff = 0.3;
    box.color = {120, 100, 80};
    s.objects = {box};
    s.ee_start = snapped(0.036, 0.018);
    // descend clear of the plate edge, slip under the overhang, then lift
    // along the opening arc about the hinge
    s.script = {snapped(0.036, 0.010),  snapped(0.036, 0.000),  snapped(0.036, -0.010),
                snapped(0.036, -0.020), snapped(0.035, -0.028), snapped(0.028, -0.029),
                snapped(0.028, -0.021), snapped(0.026, -0.012), snapped(0.024, -0.002),
                snapped(0.020, 0.006),  snapped(0.014, 0.014),  snapped(0.006, 0.020)};
    s.settle_ticks = 2;
    s.success = SuccessKind::LidOpen;
    s.lid_open_angle = 0.45;
    s.goal_object = 0;
    return s;
}

const std::map<std::string, Scenario>& registry() {
    static const std::map<std::string, Scenario> reg = [] {
        std::map<std::string, Scenario> m;
        for (auto& s : {make_reach(), make_peg(), make_push(), make_lid()}) m[s.id] = s;
        return m;
    }();
    return reg;
}

}  // namespace

const Scenario& get_scenario(const std::string& id) {
    auto it = registry().find(id);
    if (it == registry().end()) throw std::invalid_argument("unknown scenario: " + id);
    return it->second;
}

std::vector<std::string> scenario_ids() {
    std::vector<std::string> out;
    for (const auto& [k, v] : registry()) out.push_back(k);
    return out;
}

World reset(const std::string& scenario, std::uint64_t seed, const RandomizationSpec& rnd,
            const SimConfig& cfg) {
    const Scenario& scn = get_scenario(scenario);
    World w;
    w.cfg = cfg;
    if (scenario == "push-block" && cfg.view_half == SimConfig{}.view_half) {
        w.cfg.view_half = 0.135;  // keep the block in view across the eval range
    }
    w.scenario_id = scenario;
    w.objects = scn.objects;
    w.ee_body = scn.ee_body;
    w.ee_pose = scn.ee_start;
    w.ee_target = scn.ee_start;
    w.rng_state = seed;

    if (rnd.trans_range > 0.0 || rnd.rot_range > 0.0) {
        Rng rng(seed);
        double dx = 0.0, dy = 0.0;
        if (rnd.trans_range > 0.0) {
            do {
                dx = rng.uniform(-rnd.trans_range, rnd.trans_range);
                dy = rng.uniform(-rnd.trans_range, rnd.trans_range);
            } while (dx * dx + dy * dy > rnd.trans_range * rnd.trans_range);
            dx = snap_to_grid(dx);
            dy = snap_to_grid(dy);
        }
        double dth = rnd.rot_range > 0.0 ? rng.uniform(-rnd.rot_range, rnd.rot_range) : 0.0;
        const Pose anchor = scn.objects[scn.goal_object].pose;
        const double c = std::cos(dth), s = std::sin(dth);
        for (auto& obj : w.objects) {
            double rx = obj.pose.x - anchor.x, ry = obj.pose.y - anchor.y;
            obj.pose.x = anchor.x + snap_to_grid(c * rx - s * ry) + dx;
            obj.pose.y = anchor.y + snap_to_grid(s * rx + c * ry) + dy;
            obj.pose.theta = wrap_angle(obj.pose.theta + dth);
        }
        w.scene_offset = Pose{dx, dy, wrap_angle(dth)};
    }
    return w;
}

bool success_predicate(const World& w) {
    const Scenario& scn = get_scenario(w.scenario_id);
    switch (scn.success) {
        case SuccessKind::ReachGoal: {
            Pose goal = compose(w.objects[scn.goal_object].pose, scn.goal_offset);
            return translation_distance(w.ee_pose, goal) <= 0.012 &&
                   std::abs(angular_distance(w.ee_pose.theta, goal.theta)) <= 0.15;
        }
        case SuccessKind::PegInserted: {
            Pose local = relative(w.objects[scn.goal_object].pose, w.ee_pose);
            return std::abs(local.x) <= 0.003 && local.y <= 0.003 && local.y >= -0.008 &&
                   std::abs(local.theta) <= 0.12;
        }
        case SuccessKind::BlockAtGoal: {
            Pose rel = relative(w.objects[1].pose, w.objects[0].pose);
            return std::abs(rel.x) <= 0.015 && rel.y >= -0.027;
        }
        case SuccessKind::LidOpen:
            return w.objects[scn.goal_object].hinge_angle >= scn.lid_open_angle;
    }
    return false;
}

World translated(const World& w, double dx, double dy) {
    World out = w;
    out.ee_pose.x += dx;
    out.ee_pose.y += dy;
    out.ee_target.x += dx;
    out.ee_target.y += dy;
    for (auto& obj : out.objects) {
        obj.pose.x += dx;
        obj.pose.y += dy;
    }
    return out;
}

void displace_object(World& w, int index, double dx, double dy) {
    w.objects.at(index).pose.x += snap_to_grid(dx);
    w.objects.at(index).pose.y += snap_to_grid(dy);
}

}  // namespace retrace
