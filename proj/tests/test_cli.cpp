// End-to-end exercise of the command-line pipeline on a miniature fleet:
// synth -> train -> embed -> eval/sweep-k/driver-id/detect/project, plus the
// determinism and contamination guarantees.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
    if (ok) {
        std::printf("[ok] %s\n", what.c_str());
    } else {
        std::printf("[FAILED] %s\n", what.c_str());
        ++failures;
    }
}

int run(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-cli>\n");
        return 1;
    }
    const std::string cli = argv[1];
    const fs::path root = fs::temp_directory_path() / "d2v_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);

    const fs::path cfg_path = root / "config.json";
    {
        std::ofstream f(cfg_path);
        f << R"({
  "seed": 11,
  "stride": 10,
  "k_grid": [0.5, 1.0],
  "synth": {"n_drivers": 6, "sessions_per_driver": 2, "session_s": 300.0,
            "slam_rate_per_hour": 150.0, "seed": 11},
  "arch": {"gru_hidden": 8, "embed_dim": 4},
  "train": {"epochs": 3, "batch_size": 128, "lr": 0.002, "patience": 3},
  "head": {"epochs": 20, "patience": 5}
})";
    }
    const std::string base = cli + " ";
    const std::string cfg = " --config " + cfg_path.string();

    const fs::path data = root / "data";
    check(run(base + "synth" + cfg + " --out " + data.string()) == 0, "synth succeeds");
    check(fs::exists(data / "events.csv"), "events file written");
    check(fs::exists(data / "manifest.json"), "synth manifest written");

    const fs::path model = root / "model";
    check(run(base + "train" + cfg + " --data " + data.string() + " --out " + model.string()) == 0,
          "train succeeds");
    check(fs::exists(model / "checkpoint.d2v"), "checkpoint written");
    check(fs::exists(model / "history.csv"), "history written");

    const fs::path emb = root / "emb";
    check(run(base + "embed" + cfg + " --data " + data.string() + " --model " + model.string() +
              " --out " + emb.string()) == 0,
          "embed succeeds");
    const fs::path emb_file = emb / "embeddings.csv";
    check(fs::exists(emb_file), "embeddings artifact written");

    const fs::path eval1 = root / "eval1";
    check(run(base + "eval" + cfg + " --data " + data.string() + " --model " + model.string() +
              " --emb " + emb_file.string() + " --out " + eval1.string()) == 0,
          "eval succeeds");
    check(fs::exists(eval1 / "report.csv"), "eval report written");
    check(fs::exists(eval1 / "per_channel.csv"), "per-channel report written");

    // seed replay reproduces the report byte for byte
    const fs::path eval2 = root / "eval2";
    check(run(base + "eval" + cfg + " --data " + data.string() + " --model " + model.string() +
              " --emb " + emb_file.string() + " --out " + eval2.string()) == 0,
          "eval replay succeeds");
    check(slurp(eval1 / "report.csv") == slurp(eval2 / "report.csv"),
          "replayed eval report is identical");

    const fs::path ksweep = root / "ksweep";
    check(run(base + "sweep-k" + cfg + " --data " + data.string() + " --model " + model.string() +
              " --emb " + emb_file.string() + " --out " + ksweep.string()) == 0,
          "sweep-k succeeds");
    check(fs::exists(ksweep / "k_sweep.csv"), "k-sweep curve written");

    const fs::path driver = root / "driver";
    check(run(base + "driver-id" + cfg + " --data " + data.string() + " --model " +
              model.string() + " --emb " + emb_file.string() + " --out " + driver.string()) == 0,
          "driver-id succeeds");
    check(fs::exists(driver / "driver_id.csv"), "driver-id report written");

    const fs::path detect = root / "detect";
    check(run(base + "detect" + cfg + " --data " + data.string() + " --model " + model.string() +
              " --out " + detect.string()) == 0,
          "detect succeeds");
    check(fs::exists(detect / "hard_brake.csv"), "hard-brake report written");
    check(fs::exists(detect / "roc_points.csv"), "roc points written");

    const fs::path project = root / "project";
    check(run(base + "project" + cfg + " --data " + data.string() + " --model " + model.string() +
              " --out " + project.string()) == 0,
          "project succeeds");
    check(fs::exists(project / "tsne.csv"), "tsne emission written");
    check(fs::exists(project / "track_rgb.csv"), "rgb track written");

    // guard: embeddings from a different model are rejected with the
    // contamination exit code
    const fs::path model2 = root / "model2";
    check(run(base + "train" + cfg + " --seed 12 --data " + data.string() + " --out " +
              model2.string()) == 0,
          "second train succeeds");
    const int rc = run(base + "eval" + cfg + " --data " + data.string() + " --model " +
                       model2.string() + " --emb " + emb_file.string() + " --out " +
                       (root / "bad").string());
    check(rc == 5, "mismatched embeddings artifact exits with the contamination code");

    // guard: malformed config
    const fs::path bad_cfg = root / "bad.json";
    {
        std::ofstream f(bad_cfg);
        f << "{ not json";
    }
    const int rc2 = run(base + "synth --config " + bad_cfg.string() + " --out " +
                        (root / "x").string() + " 2>/dev/null");
    check(rc2 != 0, "malformed config fails");

    fs::remove_all(root);
    if (failures) {
        std::printf("%d check(s) failed\n", failures);
        return 1;
    }
    std::printf("all CLI checks passed\n");
    return 0;
}
