#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "kdqa/cli.hpp"
#include "kdqa/distill.hpp"
#include "kdqa/error.hpp"
#include "kdqa/eval.hpp"
#include "kdqa/noise.hpp"
#include "kdqa/ops.hpp"

namespace py = pybind11;
using namespace kdqa;

namespace {

py::dict example_to_dict(const QaExample& ex) {
  py::dict d;
  d["id"] = ex.id;
  d["question_tokens"] = ex.question_tokens;
  d["document_tokens"] = ex.document_tokens;
  d["answer_start"] = ex.answer_start;
  d["answer_end"] = ex.answer_end;
  d["answer_text"] = ex.answer_text;
  return d;
}

QaExample example_from_dict(const py::dict& d) {
  QaExample ex;
  ex.id = d["id"].cast<std::string>();
  ex.question_tokens = d["question_tokens"].cast<std::vector<std::string>>();
  ex.document_tokens = d["document_tokens"].cast<std::vector<std::string>>();
  ex.answer_start = d["answer_start"].cast<std::size_t>();
  ex.answer_end = d["answer_end"].cast<std::size_t>();
  ex.answer_text = d["answer_text"].cast<std::string>();
  return ex;
}

py::list examples_to_list(const Dataset& ds) {
  py::list out;
  for (const auto& ex : ds.examples) out.append(example_to_dict(ex));
  return out;
}

Tensor vector_tensor(const std::vector<double>& v, bool grad = false) {
  return Tensor({v.size()}, v, grad);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Teacher-student distillation for noise-robust extractive QA.";
  m.attr("__version__") = std::string(kToolVersion);

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);

  m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));
  m.def("normalize_answer", [](const std::string& text) { return normalize_answer(text); }, py::arg("text"));
  m.def("exact_match", [](const std::string& p, const std::string& g) { return exact_match(p, g); },
        py::arg("prediction"), py::arg("gold"));
  m.def("f1_score", [](const std::string& p, const std::string& g) { return f1_score(p, g); },
        py::arg("prediction"), py::arg("gold"));
  m.def("word_error_rate",
        [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
          return word_error_rate(ref, hyp);
        },
        py::arg("reference"), py::arg("hypothesis"));

  m.def("softmax_temp",
        [](const std::vector<double>& logits, double tau) {
          NoGradGuard no_grad;
          const Tensor probs = softmax_temp(vector_tensor(logits), tau);
          const auto p = probs.values();
          return std::vector<double>(p.begin(), p.end());
        },
        py::arg("logits"), py::arg("tau") = 1.0);

  m.def("extract_span",
        [](const std::vector<double>& start, const std::vector<double>& end, std::size_t max_answer_len) {
          return extract_span(start, end, max_answer_len);
        },
        py::arg("start"), py::arg("end"), py::arg("max_answer_len"));

  m.def("kd_loss",
        [](const std::vector<double>& student_start, const std::vector<double>& student_end,
           const std::vector<double>& teacher_start, const std::vector<double>& teacher_end,
           std::size_t gold_start, std::size_t gold_end, double alpha, double tau,
           const std::string& kl_direction) {
          DistillConfig cfg;
          cfg.alpha = alpha;
          cfg.tau = tau;
          cfg.kl_direction = parse_kl_direction(kl_direction);
          const SpanLogits student{vector_tensor(student_start, true), vector_tensor(student_end, true)};
          const SpanLogits teacher{vector_tensor(teacher_start), vector_tensor(teacher_end)};
          const auto kd = kd_loss(student, teacher, gold_start, gold_end, cfg);
          backward(kd.total);
          py::dict out;
          out["total"] = kd.total.item();
          out["soft"] = kd.soft;
          out["hard"] = kd.hard;
          const auto gs = student.start.grad(), ge = student.end.grad();
          out["grad_start"] = std::vector<double>(gs.begin(), gs.end());
          out["grad_end"] = std::vector<double>(ge.begin(), ge.end());
          return out;
        },
        py::arg("student_start"), py::arg("student_end"), py::arg("teacher_start"), py::arg("teacher_end"),
        py::arg("gold_start"), py::arg("gold_end"), py::arg("alpha") = 0.9, py::arg("tau") = 2.0,
        py::arg("kl_direction") = "teacher_to_student",
        "Distillation loss and its gradient with respect to the student logits.");

  m.def("generate_toy_corpus",
        [](std::size_t train, std::size_t dev, std::uint64_t seed) {
          ToyCorpusSpec spec;
          spec.train_size = train;
          spec.dev_size = dev;
          const auto [tr, dv] = generate_toy_corpus(spec, seed);
          return py::make_tuple(examples_to_list(tr), examples_to_list(dv));
        },
        py::arg("train") = 2000, py::arg("dev") = 500, py::arg("seed") = 0);

  m.def("calibrate_noise",
        [](const py::list& examples, double target_wer, const std::string& mode, std::uint64_t seed,
           std::size_t pool_size) {
          Dataset ds;
          for (const auto& item : examples) ds.examples.push_back(example_from_dict(item.cast<py::dict>()));
          const Dataset splits[] = {ds};
          const auto confusion = build_confusion_sets(build_vocab(splits), pool_size);
          const auto cal = calibrate_channel(target_wer, parse_noise_mode(mode), ds.examples, confusion, seed,
                                             pool_size);
          const auto noisy = corrupt(ds, cal.config, confusion);
          py::list out_examples;
          for (const auto& n : noisy.examples) {
            auto d = example_to_dict(n.example);
            d["span_status"] = std::string(to_string(n.span_status));
            d["provenance"] = n.provenance;
            out_examples.append(d);
          }
          py::dict out;
          out["measured_wer"] = cal.measured_wer;
          out["rounds"] = cal.rounds;
          out["p_sub"] = cal.config.p_sub;
          out["p_del"] = cal.config.p_del;
          out["p_ins"] = cal.config.p_ins;
          out["examples"] = out_examples;
          return out;
        },
        py::arg("examples"), py::arg("target_wer") = 0.2277, py::arg("mode") = "full", py::arg("seed") = 0,
        py::arg("pool_size") = 5);

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = run_cli(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one kdqa command; returns (exit_code, stdout, stderr).");
}
