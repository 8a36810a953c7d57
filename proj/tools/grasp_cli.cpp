// Command-line driver for the grasping-motion pipeline:
//   synth | seed | train | generate | refine-feet | refine-hand | evaluate | pipeline
// Exit codes: 0 success, 1 usage, 2 data validation, 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "grasp/io.hpp"
#include "grasp/metrics.hpp"
#include "grasp/synth.hpp"

namespace fs = std::filesystem;
using namespace grasp;

namespace {

struct SkeletonBundle {
    Skeleton skeleton;
    HandModel hand;
};

SkeletonBundle load_skeleton_or_default(const std::string& path) {
    if (path.empty()) {
        return {standard_skeleton(), HandModel{}};
    }
    auto [skel, hand] = io::load_skeleton(path);
    return {skel, hand};
}

io::PipelineConfig load_config_or_default(const std::string& path) {
    if (path.empty()) {
        return io::PipelineConfig{};
    }
    return io::load_config(path);
}

std::vector<fs::path> motion_files_in(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().string().ends_with(".motion.json")) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw io::FileFormatError("no *.motion.json files in " + dir.string());
    }
    return files;
}

std::vector<fs::path> motion_inputs(const std::string& path) {
    if (fs::is_directory(path)) {
        return motion_files_in(path);
    }
    return {fs::path(path)};
}

void run_parallel(std::size_t count, int jobs, const std::function<void(std::size_t)>& work) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            work(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr error;
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    work(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

MotionSequence generate_from_endpoints(GeneratorNet& net, const Skeleton& skel, const MotionSequence& endpoints,
                                       int frames, double fps) {
    const auto seeded = seed_interpolation(extend_with_joints(skel, endpoints.frames.front()),
                                           extend_with_joints(skel, endpoints.frames.back()), frames);
    return generate(net, seeded, skel.length_vector(), fps);
}

MetricsReport evaluate_sequences(const Skeleton& skel, const std::vector<MotionSequence>& generated,
                                 const std::vector<MotionSequence>& reference, const ObjectCloud* object,
                                 const io::PipelineConfig& cfg, int jobs, io::json* per_sequence) {
    MetricsReport agg;
    const auto t0 = std::chrono::steady_clock::now();
    const BodyMap map = BodyMap::resolve(skel);
    const HandSurface hs = build_hand_surface(skel, map);
    VoxelGrid object_grid;
    if (object != nullptr) {
        object_grid = voxelize_solid(object->points, cfg.voxel_step);
    }

    std::vector<MetricsReport> reports(generated.size());
    run_parallel(generated.size(), jobs, [&](std::size_t i) {
        MetricsReport r;
        const MotionSequence& gen = generated[i];
        const MotionSequence& ref = reference[reference.size() == 1 ? 0 : i];
        std::tie(r.end_mjd_body_mm, r.end_mjd_rhand_mm) = end_mjd(skel, gen.frames.back(), ref.frames.back());
        r.skating_cm_per_s = skating(gen, skel, cfg.skating_mean);
        if (object != nullptr) {
            std::vector<VoxelGrid> hand_grids;
            const int first = std::max(0, gen.frame_count() - 10);
            for (int f = first; f < gen.frame_count(); ++f) {
                hand_grids.push_back(
                    voxelize_hand(skel, gen.frames[static_cast<std::size_t>(f)], hs, cfg.voxel_step));
            }
            r.inter_v1_cm3 = inter_volume(hand_grids, object_grid, 1);
            r.inter_v5_cm3 = inter_volume(hand_grids, object_grid, 5);
            r.inter_v10_cm3 = inter_volume(hand_grids, object_grid, 10);
        }
        reports[i] = r;
    });

    std::vector<Eigen::MatrixXd> gen_series, ref_series;
    for (const auto& s : generated) {
        gen_series.push_back(joint_series(skel, s));
    }
    for (const auto& s : reference) {
        ref_series.push_back(joint_series(skel, s));
    }
    std::tie(agg.pskl_pred_gt, agg.pskl_gt_pred) = pskl_j(gen_series, ref_series, cfg.fps);

    for (const auto& r : reports) {
        agg.end_mjd_body_mm += r.end_mjd_body_mm;
        agg.end_mjd_rhand_mm += r.end_mjd_rhand_mm;
        agg.skating_cm_per_s += r.skating_cm_per_s;
        agg.inter_v1_cm3 = std::max(agg.inter_v1_cm3, r.inter_v1_cm3);
        agg.inter_v5_cm3 = std::max(agg.inter_v5_cm3, r.inter_v5_cm3);
        agg.inter_v10_cm3 = std::max(agg.inter_v10_cm3, r.inter_v10_cm3);
    }
    const double count = static_cast<double>(reports.size());
    agg.end_mjd_body_mm /= count;
    agg.end_mjd_rhand_mm /= count;
    agg.skating_cm_per_s /= count;
    agg.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (per_sequence != nullptr) {
        *per_sequence = io::json::array();
        for (std::size_t i = 0; i < reports.size(); ++i) {
            io::json rec = io::metrics_to_json(reports[i]);
            rec.erase("pskl_pred_gt");
            rec.erase("pskl_gt_pred");
            rec.erase("wall_time_s");
            rec["index"] = i;
            per_sequence->push_back(rec);
        }
    }
    return agg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Whole-body grasping-motion generation, refinement and evaluation"};
    app.require_subcommand(1);

    std::string skeleton_path, config_path;
    app.add_option("--skeleton", skeleton_path, "skeleton config file (default: built-in 37-joint humanoid)");
    app.add_option("--config", config_path, "pipeline config file (default: built-in values)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a deterministic synthetic corpus");
    std::string synth_out = "corpus";
    int synth_count = 8;
    uint64_t synth_seed = 1;
    int synth_frames = 30;
    double synth_fps = 30.0, synth_drift = 0.0;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--count", synth_count, "number of scenes");
    synth_cmd->add_option("--seed", synth_seed, "RNG seed");
    synth_cmd->add_option("--frames", synth_frames, "sequence length T");
    synth_cmd->add_option("--fps", synth_fps, "frames per second");
    synth_cmd->add_option("--drift", synth_drift, "contact-phase foot drift (m/frame)");

    // seed
    auto* seed_cmd = app.add_subcommand("seed", "linearly interpolate between the endpoints of a motion");
    std::string seed_in, seed_out;
    int seed_frames = 0;
    seed_cmd->add_option("--in", seed_in, "motion file providing the endpoint poses")->required();
    seed_cmd->add_option("--out", seed_out, "output motion file")->required();
    seed_cmd->add_option("--frames", seed_frames, "sequence length T (default: from config)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the generator on a corpus");
    std::string train_corpus, train_out, train_trace;
    uint64_t train_seed = 1;
    train_cmd->add_option("--corpus", train_corpus, "directory of *.motion.json samples")->required();
    train_cmd->add_option("--out", train_out, "output weight checkpoint")->required();
    train_cmd->add_option("--trace", train_trace, "loss trace CSV");
    train_cmd->add_option("--seed", train_seed, "RNG seed");

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "run the generator between the endpoints of a motion");
    std::string gen_in, gen_out, gen_weights;
    int gen_frames = 0;
    gen_cmd->add_option("--in", gen_in, "motion file providing the endpoint poses")->required();
    gen_cmd->add_option("--weights", gen_weights, "weight checkpoint")->required();
    gen_cmd->add_option("--out", gen_out, "output motion file")->required();
    gen_cmd->add_option("--frames", gen_frames, "sequence length T (default: from checkpoint)");

    // refine-feet
    auto* feet_cmd = app.add_subcommand("refine-feet", "IK-based lower-body post-processing");
    std::string feet_in, feet_out;
    double feet_threshold = -1.0;
    int feet_jobs = 1;
    feet_cmd->add_option("--in", feet_in, "motion file or directory")->required();
    feet_cmd->add_option("--out", feet_out, "output file or directory")->required();
    feet_cmd->add_option("--threshold", feet_threshold, "contact threshold (default: from config)");
    feet_cmd->add_option("--jobs", feet_jobs, "worker threads for directory input");

    // refine-hand
    auto* hand_cmd = app.add_subcommand("refine-hand", "grasping upper-body post-processing");
    std::string hand_in, hand_out, hand_cloud;
    hand_cmd->add_option("--in", hand_in, "motion file")->required();
    hand_cmd->add_option("--cloud", hand_cloud, "object point cloud")->required();
    hand_cmd->add_option("--out", hand_out, "output motion file")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "compute END-MJD, PSKL-J, INTER-VOLUME and SKATING");
    std::string eval_in, eval_ref, eval_cloud, eval_out;
    int eval_jobs = 1;
    eval_cmd->add_option("--in", eval_in, "generated motion file or directory")->required();
    eval_cmd->add_option("--ref", eval_ref, "reference motion file or directory")->required();
    eval_cmd->add_option("--cloud", eval_cloud, "object point cloud (enables INTER-VOLUME)");
    eval_cmd->add_option("--out", eval_out, "report JSON (default: stdout)");
    eval_cmd->add_option("--jobs", eval_jobs, "worker threads");

    // pipeline
    auto* pipe_cmd = app.add_subcommand("pipeline", "seed -> generate -> refine-feet -> refine-hand -> evaluate");
    std::string pipe_in, pipe_cloud, pipe_weights, pipe_out;
    uint64_t pipe_seed = 1;
    pipe_cmd->add_option("--in", pipe_in, "reference motion (endpoints + evaluation target)")->required();
    pipe_cmd->add_option("--cloud", pipe_cloud, "object point cloud")->required();
    pipe_cmd->add_option("--out", pipe_out, "output directory")->required();
    pipe_cmd->add_option("--weights", pipe_weights, "weight checkpoint (default: untrained network)");
    pipe_cmd->add_option("--seed", pipe_seed, "seed for the untrained-network fallback");

    CLI11_PARSE(app, argc, argv);

    try {
        const SkeletonBundle sk = load_skeleton_or_default(skeleton_path);
        const io::PipelineConfig cfg = load_config_or_default(config_path);

        if (synth_cmd->parsed()) {
            fs::create_directories(synth_out);
            SynthOptions opt;
            opt.seq_len = synth_frames;
            opt.fps = synth_fps;
            opt.drift_per_frame = synth_drift;
            io::save_skeleton(fs::path(synth_out) / "skeleton.json", sk.skeleton, sk.hand);
            for (int i = 0; i < synth_count; ++i) {
                const SynthScene scene =
                    synth_scene(sk.skeleton, synth_seed + 9973ull * static_cast<uint64_t>(i), opt);
                char name[32];
                std::snprintf(name, sizeof(name), "sample_%03d", i);
                io::save_motion(fs::path(synth_out) / (std::string(name) + ".motion.json"), scene.motion);
                io::save_cloud(fs::path(synth_out) / (std::string(name) + ".cloud.txt"), scene.object);
            }
            std::cout << "wrote " << synth_count << " scenes to " << synth_out << "\n";
        } else if (seed_cmd->parsed()) {
            const MotionSequence in = io::load_motion(seed_in);
            const int frames = seed_frames > 0 ? seed_frames : cfg.generator.seq_len;
            const auto seeded = seed_interpolation(extend_with_joints(sk.skeleton, in.frames.front()),
                                                   extend_with_joints(sk.skeleton, in.frames.back()), frames);
            MotionSequence out;
            out.fps = in.fps;
            for (const auto& f : seeded) {
                out.frames.emplace_back(Eigen::VectorXd(f.z.head(kPoseDim)));
            }
            io::save_motion(seed_out, out);
        } else if (train_cmd->parsed()) {
            std::vector<TrainingSample> corpus;
            for (const auto& file : motion_files_in(train_corpus)) {
                corpus.push_back({io::load_motion(file)});
            }
            std::vector<TraceRow> trace;
            GeneratorNet net = train(cfg.generator, corpus, sk.skeleton, train_seed, &trace);
            io::save_weights(train_out, net);
            if (!train_trace.empty()) {
                io::save_trace(train_trace, trace);
            }
            std::cout << "trained " << cfg.generator.train_steps << " steps on " << corpus.size()
                      << " samples; final loss " << (trace.empty() ? 0.0 : trace.back().total) << "\n";
        } else if (gen_cmd->parsed()) {
            const MotionSequence in = io::load_motion(gen_in);
            GeneratorNet net = io::load_weights(gen_weights);
            const int frames = gen_frames > 0 ? gen_frames : net.config().seq_len;
            io::save_motion(gen_out, generate_from_endpoints(net, sk.skeleton, in, frames, in.fps));
        } else if (feet_cmd->parsed()) {
            const double threshold = feet_threshold >= 0.0 ? feet_threshold : cfg.contact_threshold;
            const auto inputs = motion_inputs(feet_in);
            const bool dir_mode = fs::is_directory(feet_in);
            if (dir_mode) {
                fs::create_directories(feet_out);
            }
            run_parallel(inputs.size(), feet_jobs, [&](std::size_t i) {
                const MotionSequence refined = refine_feet(io::load_motion(inputs[i]), sk.skeleton, threshold);
                io::save_motion(dir_mode ? fs::path(feet_out) / inputs[i].filename() : fs::path(feet_out),
                                refined);
            });
        } else if (hand_cmd->parsed()) {
            const MotionSequence in = io::load_motion(hand_in);
            const ObjectCloud cloud = io::load_cloud(hand_cloud);
            io::save_motion(hand_out, refine_hand(in, cloud, sk.skeleton, cfg.hand));
        } else if (eval_cmd->parsed()) {
            std::vector<MotionSequence> generated, reference;
            for (const auto& f : motion_inputs(eval_in)) {
                generated.push_back(io::load_motion(f));
            }
            for (const auto& f : motion_inputs(eval_ref)) {
                reference.push_back(io::load_motion(f));
            }
            if (reference.size() != 1 && reference.size() != generated.size()) {
                throw ValidationError("evaluate: reference corpus must have 1 or matching count");
            }
            std::optional<ObjectCloud> cloud;
            if (!eval_cloud.empty()) {
                cloud = io::load_cloud(eval_cloud);
            }
            io::json per_seq;
            const MetricsReport agg = evaluate_sequences(sk.skeleton, generated, reference,
                                                         cloud ? &*cloud : nullptr, cfg, eval_jobs, &per_seq);
            io::json report{{"aggregate", io::metrics_to_json(agg)}, {"sequences", per_seq}};
            if (eval_out.empty()) {
                std::cout << report.dump(2) << "\n";
            } else {
                io::detail::write_text(eval_out, report.dump(2) + "\n");
            }
        } else if (pipe_cmd->parsed()) {
            fs::create_directories(pipe_out);
            const fs::path out_dir(pipe_out);
            std::string stage = "load";
            try {
                const MotionSequence ref = io::load_motion(pipe_in);
                const ObjectCloud cloud = io::load_cloud(pipe_cloud);

                stage = "generate";
                GeneratorNet net = pipe_weights.empty()
                                       ? GeneratorNet(cfg.generator, static_cast<int>(sk.skeleton.bone_count()),
                                                      pipe_seed)
                                       : io::load_weights(pipe_weights);
                const MotionSequence generated =
                    generate_from_endpoints(net, sk.skeleton, ref, net.config().seq_len, ref.fps);
                io::save_motion(out_dir / "generated.motion.json", generated);

                stage = "refine-feet";
                const MotionSequence feet = refine_feet(generated, sk.skeleton, cfg.contact_threshold);
                io::save_motion(out_dir / "refined_feet.motion.json", feet);

                stage = "refine-hand";
                const MotionSequence hand = refine_hand(feet, cloud, sk.skeleton, cfg.hand);
                io::save_motion(out_dir / "refined_hand.motion.json", hand);

                stage = "evaluate";
                io::json per_seq;
                const MetricsReport agg =
                    evaluate_sequences(sk.skeleton, {hand}, {ref}, &cloud, cfg, 1, &per_seq);
                io::json report{{"aggregate", io::metrics_to_json(agg)}, {"sequences", per_seq}};
                io::detail::write_text(out_dir / "report.json", report.dump(2) + "\n");
                std::cout << report["aggregate"].dump(2) << "\n";
            } catch (...) {
                io::detail::write_text(out_dir / "FAILED.txt", "failed at stage: " + stage + "\n");
                throw;
            }
        }
        return 0;
    } catch (const io::FileFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
