#include "shadowfit/simd/ops.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace shadowfit::simd {

#ifdef SHADOWFIT_WITH_AVX2
const Ops& avx2_ops();  // defined in ops_avx2.cpp
#endif

namespace {

bool cpu_has_avx2() {
#if defined(SHADOWFIT_WITH_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops* lookup(std::string_view name) {
  if (name == "scalar") return &scalar_ops();
#ifdef SHADOWFIT_WITH_AVX2
  if (name == "avx2" && cpu_has_avx2()) return &avx2_ops();
#endif
  return nullptr;
}

const Ops* select_default() {
  if (const char* env = std::getenv("SHADOWFIT_SIMD")) {
    if (const Ops* o = lookup(env)) return o;
  }
#ifdef SHADOWFIT_WITH_AVX2
  if (cpu_has_avx2()) return &avx2_ops();
#endif
  return &scalar_ops();
}

std::atomic<const Ops*> g_active{nullptr};

}  // namespace

const Ops& ops() {
  const Ops* o = g_active.load(std::memory_order_acquire);
  if (!o) {
    o = select_default();
    g_active.store(o, std::memory_order_release);
  }
  return *o;
}

bool force_backend(std::string_view name) {
  const Ops* o = lookup(name);
  if (!o) return false;
  g_active.store(o, std::memory_order_release);
  return true;
}

const char* const* available_backends(std::size_t* count) {
  static const char* names[2];
  std::size_t n = 0;
  names[n++] = "scalar";
  if (cpu_has_avx2()) names[n++] = "avx2";
  *count = n;
  return names;
}

}  // namespace shadowfit::simd
