#include <cmath>
#include <cstring>
#include <string>

#include "doctest.h"
#include "nvspin/nvspin.h"

namespace {

struct Ctx {
  nvspin_context* p = nullptr;
  explicit Ctx(const char* json = nullptr) { REQUIRE(nvspin_context_create(json, &p) == NVSPIN_OK); }
  ~Ctx() { nvspin_context_destroy(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  nvspin_free(s);
  return out;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(nvspin_status_name(NVSPIN_OK)) == "ok");
  CHECK(std::string(nvspin_version()).find("1.0.0") != std::string::npos);
}

TEST_CASE("invalid configs report validation errors") {
  nvspin_context* c = nullptr;
  CHECK(nvspin_context_create(R"({"geometry": {"bogus": 1}})", &c) == NVSPIN_ERR_VALIDATION);
  CHECK(c == nullptr);
  CHECK(std::string(nvspin_last_error()).find("bogus") != std::string::npos);
  CHECK(nvspin_context_create_from_file("/nonexistent.json", &c) == NVSPIN_ERR_IO);
  CHECK(nvspin_context_create(nullptr, nullptr) == NVSPIN_ERR_VALIDATION);
}

TEST_CASE("scalar helpers") {
  Ctx ctx;
  double b = 0.0;
  REQUIRE(nvspin_mean_field_from_phase(ctx.p, -0.128, &b) == NVSPIN_OK);
  CHECK(b == doctest::Approx(-0.128 / (2.0 * 1.76085963023e11 * 6.994e-6)));
  const double zero[3] = {0, 0, 0};
  CHECK(nvspin_exotic_field_point(ctx.p, zero, 0.05, 1e-6, 1e-6, &b) == NVSPIN_ERR_SINGULARITY);
  CHECK(std::strlen(nvspin_last_error()) > 0);
  CHECK(nvspin_context_set_format(ctx.p, "xml") == NVSPIN_ERR_VALIDATION);
  REQUIRE(nvspin_context_set_format(ctx.p, "json") == NVSPIN_OK);
  CHECK(std::string(nvspin_context_table_extension(ctx.p)) == "json");
}

TEST_CASE("velocity synth and fit round trip") {
  Ctx ctx;
  char* csv = nullptr;
  REQUIRE(nvspin_synth(ctx.p, "velocity", 0.0, &csv) == NVSPIN_OK);
  const std::string data = take(csv);
  CHECK(data.rfind("vmax_mps,bbar_nT,sigma_nT\n", 0) == 0);
  char *res = nullptr, *resid = nullptr, *curve = nullptr;
  REQUIRE(nvspin_fit(ctx.p, "velocity", data.c_str(), &res, &resid, &curve) == NVSPIN_OK);
  const std::string json = take(res);
  take(resid);
  take(curve);
  CHECK(json.find("\"k\"") != std::string::npos);
  CHECK(nvspin_fit(ctx.p, "sideways", data.c_str(), &res, &resid, &curve) == NVSPIN_ERR_VALIDATION);
  CHECK(nvspin_fit(ctx.p, "velocity", "nonsense\n", &res, &resid, &curve) == NVSPIN_ERR_VALIDATION);
}

TEST_CASE("non-positive velocities are rejected") {
  Ctx ctx;
  char *res = nullptr, *resid = nullptr, *curve = nullptr;
  CHECK(nvspin_fit(ctx.p, "velocity", "vmax_mps,bbar_nT,sigma_nT\n0,1,1\n0,2,1\n", &res, &resid, &curve) ==
        NVSPIN_ERR_VALIDATION);
}

TEST_CASE("manifest lists outputs") {
  Ctx ctx;
  const char* names[] = {"a.csv"};
  const char* contents[] = {"x\n1\n"};
  char* m = nullptr;
  REQUIRE(nvspin_manifest(ctx.p, "synth", 0.5, names, contents, 1, &m) == NVSPIN_OK);
  const std::string json = take(m);
  CHECK(json.find("a.csv") != std::string::npos);
  CHECK(json.find("config_hash") != std::string::npos);
}
