#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "d2v/data.hpp"
#include "d2v/util.hpp"

namespace d2v {

struct DriverProfile {
    std::string driver_id;
    double aggressiveness = 0.5;    // [0,1], scales accel comfort and pedal noise
    double speed_offset_kmh = 0.0;  // preferred offset from the regime limit
    double blinker_lead_s = 1.5;    // blinker comes on this long before a turn
    double pedal_smoothness = 0.3;  // pedal low-pass time constant, seconds
    double slam_rate_per_hour = 20.0;
};

enum class RegimeKind { Highway = 0, Rural = 1, City = 2 };

inline const char* regime_name(RegimeKind k) {
    switch (k) {
        case RegimeKind::Highway: return "highway";
        case RegimeKind::Rural: return "rural";
        default: return "city";
    }
}

struct RoadRegime {
    RegimeKind kind = RegimeKind::Rural;
    double speed_limit_kmh = 80.0;
    double turn_rate_per_min = 0.5;  // intra-regime turns
    double stop_rate_per_min = 0.0;
    double mean_dwell_s = 90.0;
    double transition[3] = {0.0, 0.5, 0.5};  // row over {highway, rural, city}, self = 0
};

inline std::vector<RoadRegime> default_regimes() {
    // Dwells sit well above the 100 s forecast horizon so the regime at t
    // dominates the next-100 s averages.
    std::vector<RoadRegime> r(3);
    r[0] = {RegimeKind::Highway, 130.0, 0.05, 0.0, 320.0, {0.0, 0.7, 0.3}};
    r[1] = {RegimeKind::Rural, 75.0, 0.8, 0.15, 260.0, {0.4, 0.0, 0.6}};
    r[2] = {RegimeKind::City, 32.0, 2.0, 1.8, 200.0, {0.25, 0.75, 0.0}};
    return r;
}

struct SynthConfig {
    size_t n_drivers = 6;
    size_t sessions_per_driver = 4;
    double session_s = 900.0;
    uint64_t seed = 0;
    double slam_rate_per_hour = 30.0;      // brake slams
    double gas_slam_rate_per_hour = 12.0;  // gas slams
    double slam_jump_min = 30.0;           // pedal jump over the 0.4 s interval
    double slam_jump_max = 65.0;
    bool precursors = true;  // stereotyped pre-slam signatures; off = ablation

    void validate() const {
        if (session_s < 120.0) throw ConfigError("synth: session must be >= 120 s");
        if (n_drivers < 2) throw ConfigError("synth: need >= 2 drivers");
        if (slam_jump_min <= 25.0) throw ConfigError("synth: slam jump must exceed 25");
    }

    nlohmann::json to_json() const {
        return {{"n_drivers", n_drivers},
                {"sessions_per_driver", sessions_per_driver},
                {"session_s", session_s},
                {"seed", seed},
                {"slam_rate_per_hour", slam_rate_per_hour},
                {"gas_slam_rate_per_hour", gas_slam_rate_per_hour},
                {"slam_jump_min", slam_jump_min},
                {"slam_jump_max", slam_jump_max},
                {"precursors", precursors}};
    }
};

struct SynthEvent {
    std::string kind;  // brake_slam | gas_slam | turn | regime_change | stop
    std::string session_id;
    size_t start = 0;
    size_t end = 0;
};

// Channel layout of the generated fleet. 12 floats + 8 booleans feed the
// model; lat/lon ride along as metadata.
inline ChannelSchema synth_schema() {
    ChannelSchema s;
    auto f = [&](const char* n) { s.channels.push_back({n, ChannelKind::Float, false}); };
    auto b = [&](const char* n) { s.channels.push_back({n, ChannelKind::Boolean, false}); };
    f("speed_kmh");
    f("gas_pedal");
    f("brake_pedal");
    f("heading_deg");
    f("rpm");
    f("accel_long");
    f("steer_angle");
    f("lateral_accel");
    f("throttle_pos");
    f("fuel_level");
    f("engine_temp");
    f("trip_km");
    b("blinker_left");
    b("blinker_right");
    b("brake_light");
    b("stopped");
    b("cruise_active");
    b("wipers");
    b("headlights");
    b("horn");
    s.channels.push_back({"lat", ChannelKind::Float, true});
    s.channels.push_back({"lon", ChannelKind::Float, true});
    return s;
}

namespace detail {

struct Ou {
    double value = 0.0, mu = 0.0, tau = 1.0, sigma = 0.0;
    double step(std::mt19937_64& rng, std::normal_distribution<double>& stdn) {
        const double a = kSamplePeriod / tau;
        value += (mu - value) * a + sigma * std::sqrt(2.0 * a) * stdn(rng);
        return value;
    }
};

}  // namespace detail

inline std::vector<DriverProfile> make_profiles(const SynthConfig& cfg) {
    std::vector<DriverProfile> out;
    for (size_t i = 0; i < cfg.n_drivers; ++i) {
        std::mt19937_64 rng(derive_seed(cfg.seed, "driver", i));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        DriverProfile p;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "drv%03zu", i);
        p.driver_id = buf;
        // Deterministic style ladders; the axes are scrambled against each
        // other so neighbours on one habit differ on the next.
        const double lane = cfg.n_drivers > 1 ? double(i) / double(cfg.n_drivers - 1) : 0.5;
        const double lane_b = std::fmod(double(i) * 0.61803398875 + 0.23, 1.0);
        const double lane_c = std::fmod(double(i) * 0.38196601125 + 0.51, 1.0);
        p.aggressiveness = std::clamp(0.15 + 0.7 * lane + 0.1 * (u(rng) - 0.5), 0.05, 0.95);
        p.speed_offset_kmh = -18.0 + 36.0 * lane + 2.0 * (u(rng) - 0.5);
        p.blinker_lead_s = 0.8 + 1.4 * lane_b + 0.1 * (u(rng) - 0.5);
        p.pedal_smoothness = 0.12 + 0.5 * lane_c + 0.02 * (u(rng) - 0.5);
        p.slam_rate_per_hour = cfg.slam_rate_per_hour * (0.7 + 0.7 * p.aggressiveness);
        out.push_back(p);
    }
    return out;
}

struct GeneratedSession {
    Session session;
    std::vector<SynthEvent> events;
};

inline GeneratedSession generate_session(const DriverProfile& prof, const SynthConfig& cfg,
                                         uint64_t session_seed, const std::string& session_id) {
    cfg.validate();
    const auto schema = synth_schema();
    const size_t N = size_t(std::lround(cfg.session_s * kSampleRateHz));
    const double dt = kSamplePeriod;

    std::mt19937_64 rng(session_seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> stdn(0.0, 1.0);

    GeneratedSession out;
    out.session.session_id = session_id;
    out.session.driver_id = prof.driver_id;
    out.session.values = Matrix(N, schema.total_columns());
    Matrix& M = out.session.values;

    const auto regimes = default_regimes();

    // --- schedule pedal slams up front (exponential gaps) -------------------
    auto schedule = [&](double rate_per_hour) {
        std::vector<size_t> times;
        if (rate_per_hour <= 0.0) return times;
        double t = 30.0;  // keep clear of the session head
        std::exponential_distribution<double> gap(rate_per_hour / 3600.0);
        while (true) {
            t += gap(rng);
            if (t >= cfg.session_s - 20.0) break;
            times.push_back(size_t(std::lround(t * kSampleRateHz)));
        }
        return times;
    };
    const std::vector<size_t> brake_slam_times = schedule(prof.slam_rate_per_hour);
    const std::vector<size_t> gas_slam_times = schedule(cfg.gas_slam_rate_per_hour);

    // --- driving dynamics constants -----------------------------------------
    const double gas_gain = 8.0 + 3.0 * prof.aggressiveness;  // km/h/s at full gas
    const double brake_gain = 28.0;                           // km/h/s at full brake
    const double acc_comfort = 3.5 + 4.0 * prof.aggressiveness;
    const double brk_comfort = 5.0 + 4.0 * prof.aggressiveness;
    const double pedal_slew = 45.0;  // units/s outside slam overrides

    // --- state ---------------------------------------------------------------
    size_t regime_idx = size_t(std::floor(u(rng) * 3.0)) % 3;
    double dwell_left = regimes[regime_idx].mean_dwell_s * (0.5 + u(rng));

    double v = std::max(5.0, regimes[regime_idx].speed_limit_kmh + prof.speed_offset_kmh +
                                 6.0 * stdn(rng));
    double heading = 2.0 * (u(rng) - 0.5);  // all trips leave the depot northbound
    double gas = 15.0, brake = 0.0, throttle = gas;
    double fuel = 57.0 + 0.2 * u(rng);
    double temp = 86.0 + 2.0 * u(rng);
    double odo = 0.0;  // trip meter, resets each session
    double lat = 45.0 + u(rng), lon = 7.0 + u(rng);

    detail::Ou target_drift{0, 0, 20.0, 2.0};
    detail::Ou wobble{0, 0, 2.0, 0.15 + 1.1 * (prof.pedal_smoothness - 0.12)};
    detail::Ou rpm_noise{0, 0, 0.15, 20.0};
    detail::Ou rpm_trim{0, 0, 60.0, 25.0};
    detail::Ou steer_noise{0, 0, 0.12, 0.6};
    detail::Ou throttle_idle{0, 0, 70.0, 1.0};
    detail::Ou temp_ambient{0, 0, 100.0, 1.5};
    detail::Ou pedal_noise{0, 0, 0.6, 1.8 + 2.7 * prof.aggressiveness};

    // turn machinery
    bool turn_pending = false, turn_active = false, turn_is_transition = false;
    size_t turn_start = 0, turn_mid = 0, turn_end = 0, turn_cooldown_until = 0;
    double turn_angle = 0.0, turn_dur_s = 0.0;
    size_t next_regime = regime_idx;
    bool blinker_l = false, blinker_r = false;

    // regime changes are approached gradually, like leaving a highway
    bool in_approach = false;
    size_t approach_start = 0, approach_end = 0;

    // each turn lands on a different stretch of road with its own local pace
    double segment_offset = 0.0;

    // emergencies color the following minute of driving
    double post_event_bias = 0.0;

    // stop machinery
    bool stopping = false;
    size_t stop_until = 0;

    // slam override machinery
    enum class Slam { none, brake_pre, brake_jump, brake_hold, brake_release,
                      gas_lull, gas_jump, gas_hold, gas_release };
    Slam slam = Slam::none;
    size_t slam_phase_end = 0, slam_t0 = 0, slam_block_until = 0;
    double slam_jump = 0.0, slam_base = 0.0;
    size_t next_brake_slam = 0, next_gas_slam = 0;

    // weather / environment booleans
    bool rain = u(rng) < 0.25;
    bool tunnel = false;
    size_t tunnel_until = 0;
    size_t horn_until = 0;
    size_t cruise_stable = 0;

    auto begin_turn = [&](size_t i, bool transition) {
        const double lead = prof.blinker_lead_s;
        turn_pending = true;
        turn_is_transition = transition;
        turn_start = i + size_t(std::lround(lead * kSampleRateHz));
        turn_dur_s = 2.5 + 2.5 * u(rng);
        const double mag = transition ? 70.0 + 40.0 * u(rng) : 45.0 + 55.0 * u(rng);
        turn_angle = (u(rng) < 0.3 ? -1.0 : 1.0) * mag;  // right-hand traffic
        turn_end = turn_start + size_t(std::lround(turn_dur_s * kSampleRateHz));
        turn_mid = turn_start + (turn_end - turn_start) / 2;
        blinker_l = turn_angle < 0;
        blinker_r = !blinker_l;
        if (transition) {
            // pick destination regime from the transition row
            const double* row = regimes[regime_idx].transition;
            const double x = u(rng);
            next_regime = x < row[0] ? 0 : (x < row[0] + row[1] ? 1 : 2);
        }
    };

    out.events.push_back(
        {std::string("regime:") + regime_name(regimes[regime_idx].kind), session_id, 0, 0});

    for (size_t i = 0; i < N; ++i) {
        const RoadRegime& reg = regimes[regime_idx];

        // --- regime & turn scheduling ---------------------------------------
        dwell_left -= dt;
        if (!turn_pending && !turn_active && !stopping && !in_approach &&
            i >= turn_cooldown_until) {
            if (dwell_left <= 0.0) {
                in_approach = true;
                approach_start = i;
                approach_end = i + 120 + size_t(80.0 * u(rng));  // 12-20 s glide
            } else if (u(rng) < reg.turn_rate_per_min / 60.0 * dt) {
                begin_turn(i, false);
            }
        }
        if (in_approach && i >= approach_end) {
            in_approach = false;
            begin_turn(i, true);
        }
        if (turn_pending && i >= turn_start) {
            turn_pending = false;
            turn_active = true;
            out.events.push_back({"turn", session_id, turn_start, turn_end});
        }
        double turn_rate = 0.0;
        if (turn_active) {
            if (turn_is_transition && i == turn_mid) {
                regime_idx = next_regime;
                dwell_left = regimes[regime_idx].mean_dwell_s * (0.5 + u(rng));
                out.events.push_back({"regime_change", session_id, i, i});
                std::string tag = std::string("regime:") + regime_name(regimes[regime_idx].kind);
                out.events.push_back({tag, session_id, i, i});
            }
            if (i >= turn_end) {
                turn_active = false;
                turn_is_transition = false;
                blinker_l = blinker_r = false;
                turn_cooldown_until = i + 30;
                segment_offset = std::clamp(0.3 * segment_offset + 10.0 * (u(rng) - 0.5),
                                            -6.0, 6.0);
            } else {
                const double phase = double(i - turn_start) / double(turn_end - turn_start);
                const double s = std::sin(M_PI * phase);
                turn_rate = 2.0 * turn_angle / turn_dur_s * s * s;
            }
        }

        // --- stops ------------------------------------------------------------
        if (!stopping && !turn_pending && !turn_active && !in_approach && slam == Slam::none &&
            v > 12.0 && u(rng) < reg.stop_rate_per_min / 60.0 * dt) {
            stopping = true;
            stop_until = i + size_t(std::lround((6.0 + 6.0 * u(rng)) * kSampleRateHz));
            out.events.push_back({"stop", session_id, i, stop_until});
        }
        if (stopping && i >= stop_until && v < 1.0) stopping = false;

        // --- slam scheduling ----------------------------------------------------
        const size_t pre_len = cfg.precursors ? 10 : 0;
        if (slam == Slam::none && !in_approach && i >= slam_block_until) {
            if (next_brake_slam < brake_slam_times.size() &&
                i + pre_len >= brake_slam_times[next_brake_slam]) {
                const size_t t0 = i + pre_len;
                ++next_brake_slam;
                if (v > 60.0 && brake < 5.0 && (!cfg.precursors || gas > 12.0) && !stopping &&
                    t0 + 40 < N) {
                    slam = cfg.precursors ? Slam::brake_pre : Slam::brake_jump;
                    slam_t0 = t0;
                    slam_base = gas;
                    slam_jump = cfg.slam_jump_min +
                                (cfg.slam_jump_max - cfg.slam_jump_min) * u(rng);
                    slam_phase_end = cfg.precursors ? t0 : t0 + 4;
                    out.events.push_back(
                        {"brake_slam", session_id, t0,
                         t0 + size_t(std::lround((1.0 + 0.5 * u(rng)) * kSampleRateHz))});
                }
            } else if (next_gas_slam < gas_slam_times.size() &&
                       i + (cfg.precursors ? 16 : 0) >= gas_slam_times[next_gas_slam]) {
                const size_t t0 = i + (cfg.precursors ? 16 : 0);
                ++next_gas_slam;
                if (v > 15.0 && v < 60.0 && brake < 5.0 && gas < 55.0 && !stopping &&
                    t0 + 40 < N) {
                    slam = cfg.precursors ? Slam::gas_lull : Slam::gas_jump;
                    slam_t0 = t0;
                    slam_base = gas;
                    slam_jump = cfg.slam_jump_min +
                                (cfg.slam_jump_max - cfg.slam_jump_min) * u(rng);
                    slam_phase_end = cfg.precursors ? t0 : t0 + 4;
                    out.events.push_back(
                        {"gas_slam", session_id, t0,
                         t0 + size_t(std::lround((1.0 + 0.4 * u(rng)) * kSampleRateHz))});
                }
            }
        }

        // --- desired speed and pedal commands ----------------------------------
        post_event_bias *= 1.0 - dt / 40.0;
        double v_target = (reg.speed_limit_kmh + prof.speed_offset_kmh + segment_offset +
                           target_drift.step(rng, stdn)) *
                          (1.0 + post_event_bias);
        if (in_approach) {
            // glide from the regime speed toward the turn entry speed
            const double blend = double(approach_end - i) / double(approach_end - approach_start);
            v_target = 32.0 + (v_target - 32.0) * blend;
        }
        if (turn_active || turn_pending) {
            const double sharp = std::min(1.0, std::abs(turn_angle) / 110.0);
            v_target = std::min(v_target, 48.0 - 18.0 * sharp);
        }
        if (stopping) v_target = 0.0;
        v_target = std::max(v_target, 0.0);

        const double k_rev = reg.kind == RegimeKind::City ? 0.35
                             : reg.kind == RegimeKind::Rural ? 0.25
                                                             : 0.15;
        const double drag = v * v * (gas_gain / (140.0 * 140.0));
        double a_des = std::clamp(k_rev * (v_target - v), -brk_comfort, acc_comfort);

        double gas_cmd, brake_cmd;
        const double net = a_des + drag;
        if (net > 0.0) {
            gas_cmd = std::clamp(net / gas_gain * 100.0, 0.0, 100.0);
            brake_cmd = 0.0;
        } else if (a_des < -0.8) {
            gas_cmd = 0.0;
            brake_cmd = std::clamp(-a_des / brake_gain * 100.0, 0.0, 100.0);
        } else {
            gas_cmd = 0.0;
            brake_cmd = 0.0;
        }
        if (stopping && v < 6.0) {
            // hold the brake through the stop; coasting never crosses v < 0.5
            gas_cmd = 0.0;
            brake_cmd = std::max(brake_cmd, 12.0);
        }
        gas_cmd = std::clamp(gas_cmd + 4.0 * (1.0 - prof.aggressiveness) +
                                 pedal_noise.step(rng, stdn), 0.0, 100.0);

        // smooth + slew-limit toward the command
        auto follow = [&](double cur, double cmd) {
            double delta = (cmd - cur) * dt / prof.pedal_smoothness;
            delta = std::clamp(delta, -pedal_slew * dt, pedal_slew * dt);
            return std::clamp(cur + delta, 0.0, 100.0);
        };
        gas = follow(gas, gas_cmd);
        brake = follow(brake, brake_cmd);

        // --- slam overrides ------------------------------------------------------
        double rpm_flare = 0.0;
        bool clutch_in = slam == Slam::brake_jump || slam == Slam::brake_hold ||
                         slam == Slam::brake_release;
        switch (slam) {
            case Slam::none:
                break;
            case Slam::brake_pre: {
                // gas release over the second before the jump, <= 60 units/s,
                // plus a brief cover tap on the brake pedal
                const double remain = double(slam_t0 - i) / double(pre_len);
                gas = std::min(gas, std::min(slam_base, 60.0) * remain);
                const size_t until = slam_t0 - i;
                brake = until == 8 ? 6.0 : until == 7 ? 11.0 : until == 6 ? 5.0 : 0.0;
                if (i + 1 >= slam_t0) {
                    slam = Slam::brake_jump;
                    slam_phase_end = slam_t0 + 4;
                }
                break;
            }
            case Slam::brake_jump: {
                // sample at slam_t0 itself stays clean in both modes
                if (i > slam_t0) {
                    const double frac[3] = {0.5, 0.8, 1.0};
                    brake = slam_jump * frac[std::min<size_t>(i - slam_t0 - 1, 2)];
                    gas = 0.0;
                }
                if (i + 1 >= slam_phase_end) {
                    slam = Slam::brake_hold;
                    slam_phase_end = i + size_t(std::lround((0.8 + 0.5 * u(rng)) * kSampleRateHz));
                }
                break;
            }
            case Slam::brake_hold:
                gas = 0.0;
                brake = slam_jump;
                if (i >= slam_phase_end) {
                    slam = Slam::brake_release;
                    slam_phase_end = i + 26;
                }
                break;
            case Slam::brake_release:
                gas = std::min(gas, 10.0);
                brake = std::max(0.0, slam_jump * (1.0 - double(i + 26 - slam_phase_end) / 26.0));
                if (i >= slam_phase_end || brake <= 0.5) {
                    slam = Slam::none;
                    slam_block_until = i + 100;
                    post_event_bias = -0.22;  // shaken, eases off for a while
                }
                break;
            case Slam::gas_lull: {
                // gas eases off over ~1 s, then sits near zero until the jump;
                // the downshift flares the engine speed just before it
                const double cap = i + 6 < slam_t0
                                       ? std::min(slam_base, 55.0) *
                                             double(slam_t0 - 6 - i) / 10.0
                                       : 0.0;
                gas = std::min(gas, std::max(cap, 0.0) + 2.0);
                brake = 0.0;
                if (slam_t0 - i <= 5) rpm_flare = 900.0 * (1.0 - double(slam_t0 - i) / 6.0);
                if (i + 1 >= slam_t0) {
                    slam = Slam::gas_jump;
                    slam_phase_end = slam_t0 + 4;
                }
                break;
            }
            case Slam::gas_jump: {
                if (i > slam_t0) {
                    const double frac[3] = {0.5, 0.8, 1.0};
                    const double peak = std::min(100.0, 30.0 + slam_jump);
                    gas = peak * frac[std::min<size_t>(i - slam_t0 - 1, 2)];
                    brake = 0.0;
                }
                if (i + 1 >= slam_phase_end) {
                    slam = Slam::gas_hold;
                    slam_phase_end = i + size_t(std::lround((0.8 + 0.4 * u(rng)) * kSampleRateHz));
                }
                break;
            }
            case Slam::gas_hold:
                gas = std::min(100.0, 30.0 + slam_jump);
                brake = 0.0;
                if (i >= slam_phase_end) {
                    slam = Slam::gas_release;
                    slam_phase_end = i + 30;
                }
                break;
            case Slam::gas_release: {
                const double peak = std::min(100.0, 30.0 + slam_jump);
                gas = std::max(gas_cmd, peak * (1.0 - double(i + 30 - slam_phase_end) / 30.0));
                if (i >= slam_phase_end) {
                    slam = Slam::none;
                    slam_block_until = i + 100;
                    post_event_bias = 0.15;  // overtake done, presses on
                }
                break;
            }
        }

        // --- physics -----------------------------------------------------------
        const double a = gas / 100.0 * gas_gain - brake / 100.0 * brake_gain - drag +
                         0.25 * stdn(rng);
        v = std::clamp(v + a * dt, 0.0, 200.0);

        const double rate = turn_rate + wobble.step(rng, stdn);
        heading += rate * dt;

        // --- environment booleans ------------------------------------------------
        if (u(rng) < dt / (rain ? 180.0 : 420.0)) rain = !rain;
        if (!tunnel && u(rng) < dt / 420.0) {
            tunnel = true;
            tunnel_until = i + size_t((20.0 + 40.0 * u(rng)) * kSampleRateHz);
        }
        if (tunnel && i >= tunnel_until) tunnel = false;
        if (reg.kind == RegimeKind::City && horn_until <= i && u(rng) < 0.4 / 60.0 * dt)
            horn_until = i + 4 + size_t(4.0 * u(rng));

        const bool near_target = std::abs(v - v_target) < 4.0 && brake < 1.0 && gas > 5.0;
        cruise_stable = (reg.kind == RegimeKind::Highway && near_target) ? cruise_stable + 1 : 0;
        const bool cruise = cruise_stable > 20;

        // --- derived channels -----------------------------------------------------
        const double shift_v = 20.0 + 8.0 * (prof.blinker_lead_s - 0.8) / 1.4;  // shift habit
        const int gear = std::min(6, 1 + int(v / shift_v));
        const double rpm = clutch_in ? 900.0 + rpm_noise.step(rng, stdn)
                                     : 850.0 + (v - shift_v * (gear - 1)) * 55.0 + gas * 6.0 +
                                           rpm_flare + rpm_noise.step(rng, stdn) +
                                           rpm_trim.step(rng, stdn);
        const double accel_long = a / 3.6 + 0.5 * stdn(rng);
        const double steer = turn_rate * 1.6 + steer_noise.step(rng, stdn);
        const double lat_acc = v / 3.6 * rate * M_PI / 180.0 + 0.55 * stdn(rng);
        throttle += (gas + throttle_idle.step(rng, stdn) - throttle) * dt / 0.3 +
                    0.4 * stdn(rng) * std::sqrt(dt);
        throttle = std::clamp(throttle, -20.0, 120.0);
        fuel = std::max(0.0, fuel - (0.0009 * gas / 100.0 + 0.000022 * v) * dt);
        temp += (89.0 + temp_ambient.step(rng, stdn) - temp) * dt / 120.0 + 0.03 * stdn(rng);
        odo += v * dt / 3600.0;
        const double mps = v / 3.6;
        lat += mps * std::cos(heading * M_PI / 180.0) * dt / 111320.0;
        lon += mps * std::sin(heading * M_PI / 180.0) * dt / 78000.0;

        // --- emit row ----------------------------------------------------------
        double* row = M.row(i);
        row[0] = v;
        row[1] = gas;
        row[2] = brake;
        row[3] = heading;
        row[4] = rpm;
        row[5] = accel_long;
        row[6] = steer;
        row[7] = lat_acc;
        row[8] = throttle;
        row[9] = fuel;
        row[10] = temp;
        row[11] = odo;
        row[12] = blinker_l ? 1.0 : 0.0;
        row[13] = blinker_r ? 1.0 : 0.0;
        row[14] = brake > 3.0 ? 1.0 : 0.0;
        row[15] = v < 0.5 ? 1.0 : 0.0;
        row[16] = cruise ? 1.0 : 0.0;
        row[17] = rain ? 1.0 : 0.0;
        row[18] = (rain || tunnel) ? 1.0 : 0.0;
        row[19] = i < horn_until ? 1.0 : 0.0;
        row[20] = lat;
        row[21] = lon;
    }
    return out;
}

struct FleetResult {
    Dataset data;
    std::vector<SynthEvent> events;
    std::vector<DriverProfile> profiles;
};

inline FleetResult make_fleet(const SynthConfig& cfg) {
    cfg.validate();
    FleetResult fleet;
    fleet.data.schema = synth_schema();
    fleet.profiles = make_profiles(cfg);

    const size_t n = cfg.n_drivers * cfg.sessions_per_driver;
    std::vector<GeneratedSession> generated(n);
    for (size_t d = 0; d < cfg.n_drivers; ++d) {
        for (size_t s = 0; s < cfg.sessions_per_driver; ++s) {
            const size_t k = d * cfg.sessions_per_driver + s;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "ses_%03zu_%02zu", d, s);
            generated[k] = generate_session(fleet.profiles[d], cfg,
                                            derive_seed(cfg.seed, "session", k), buf);
        }
    }
    for (auto& g : generated) {
        fleet.data.sessions.push_back(std::move(g.session));
        for (auto& e : g.events) fleet.events.push_back(std::move(e));
    }
    return fleet;
}

inline void save_events(const std::filesystem::path& path, const std::vector<SynthEvent>& events) {
    std::ofstream f(path);
    f << "kind,session_id,start,end\n";
    for (const auto& e : events)
        f << e.kind << "," << e.session_id << "," << e.start << "," << e.end << "\n";
}

inline std::vector<SynthEvent> load_events(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("load_events: cannot open " + path.string());
    std::vector<SynthEvent> out;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        SynthEvent e;
        std::string tok;
        std::getline(ss, e.kind, ',');
        std::getline(ss, e.session_id, ',');
        std::getline(ss, tok, ',');
        e.start = std::stoull(tok);
        std::getline(ss, tok, ',');
        e.end = std::stoull(tok);
        out.push_back(std::move(e));
    }
    return out;
}

inline void save_fleet(const std::filesystem::path& dir, const FleetResult& fleet) {
    save_sessions(dir, fleet.data);
    save_events(dir / "events.csv", fleet.events);
}

}  // namespace d2v
