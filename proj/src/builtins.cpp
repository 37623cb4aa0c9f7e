#include <algorithm>

#include "ctf/datasets.hpp"
#include "ctf/dsl.hpp"

namespace ctf {

namespace {

// Face family: F gender, Y age, H gray hair, S smile.
constexpr const char* kFaceMstar = R"(model face_mstar {
  exo U_F ~ bernoulli(2/5)
  exo U_Y ~ bernoulli(2/5)
  exo U_H1 ~ bernoulli(2/5)
  exo U_H2 ~ bernoulli(1/5)
  var F : {0, 1} = xor(U_F, U_Y)
  var Y : {0, 1} = U_Y
  var H : {0, 1} = xor(and(not(Y), U_H1), and(Y, U_H2))
}
)";

// Hair reads the age noise instead of age itself.
constexpr const char* kFaceMprime = R"(model face_mprime {
  exo U_F ~ bernoulli(2/5)
  exo U_Y ~ bernoulli(2/5)
  exo U_H1 ~ bernoulli(2/5)
  exo U_H2 ~ bernoulli(1/5)
  var F : {0, 1} = xor(U_F, U_Y)
  var Y : {0, 1} = U_Y
  var H : {0, 1} = xor(and(not(U_Y), U_H1), and(U_Y, U_H2))
}
)";

constexpr const char* kFaceM3 = R"(model face_m3 {
  exo U_F ~ bernoulli(2/5)
  exo U_Y ~ bernoulli(2/5)
  exo U_H1 ~ bernoulli(1/4)
  exo U_H2 ~ bernoulli(1/5)
  var F : {0, 1} = xor(U_F, U_Y)
  var Y : {0, 1} = U_Y
  var H : {0, 1} = or(and(not(Y), U_H1), U_H2)
}
)";

constexpr const char* kFaceM1Smile = R"(model face_m1_smile {
  exo U_F ~ bernoulli(2/5)
  exo U_Y ~ bernoulli(2/5)
  exo U_H1 ~ bernoulli(2/5)
  exo U_H2 ~ bernoulli(1/5)
  exo U_S ~ bernoulli(1/2)
  var F : {0, 1} = xor(U_F, U_Y)
  var Y : {0, 1} = U_Y
  var H : {0, 1} = xor(and(not(Y), U_H1), and(Y, U_H2))
  var S : {0, 1} = U_S
}
)";

constexpr const char* kFaceM2Smile = R"(model face_m2_smile {
  exo U_F ~ bernoulli(2/5)
  exo U_Y ~ bernoulli(2/5)
  exo U_H1 ~ bernoulli(2/5)
  exo U_H2 ~ bernoulli(1/5)
  exo U_S ~ bernoulli(1/2)
  var F : {0, 1} = xor(U_F, U_Y)
  var Y : {0, 1} = U_Y
  var H : {0, 1} = xor(and(not(Y), U_H1), and(Y, U_H2))
  var S : {0, 1} = xor(U_S, Y)
}
)";

// Digit D, color C (1 red), bar B. The color coin is desugared into U_C,
// which also reads U_D; that shared factor is the D <-> C confounding.
// The bar reads the digit itself, giving D -> B.
constexpr const char* kBackdoor = R"(model backdoor {
  exo U_D ~ uniform(0, 9)
  exo U_1 ~ bernoulli(4/5)
  exo U_2 ~ bernoulli(9/10)
  exo U_3 ~ bernoulli(3/4)
  var D : {0..9} = U_D
  var C : {0, 1} = bern(19/20, -1/10, U_D)
  var B : {0, 1} = and(or(xor(ge(D, 5), U_1), xor(C, U_2)), U_3)
}
)";

// The bar reads U_D rather than D: D <-> B, D -> C -> B.
constexpr const char* kFrontdoor = R"(model frontdoor {
  exo U_D ~ uniform(0, 9)
  exo U_1 ~ bernoulli(4/5)
  exo U_2 ~ bernoulli(9/10)
  exo U_3 ~ bernoulli(7/10)
  var D : {0..9} = U_D
  var C : {0, 1} = bern(1/20, 1/10, D)
  var B : {0, 1} = and(or(xor(lt(U_D, 5), U_2), xor(C, U_1)), U_3)
}
)";

// Same diagram as frontdoor with the color slope and bar threshold flipped.
constexpr const char* kFrontdoorAlt = R"(model frontdoor_alt {
  exo U_D ~ uniform(0, 9)
  exo U_1 ~ bernoulli(4/5)
  exo U_2 ~ bernoulli(9/10)
  exo U_3 ~ bernoulli(7/10)
  var D : {0..9} = U_D
  var C : {0, 1} = bern(19/20, -1/10, D)
  var B : {0, 1} = and(or(xor(ge(U_D, 5), U_2), xor(C, U_1)), U_3)
}
)";

}  // namespace

const std::vector<BuiltinModel>& builtin_models() {
  static const std::vector<BuiltinModel> models = {
      {"face_mstar", "face attributes F (gender), Y (age), H (gray hair); reference model",
       kFaceMstar, false},
      {"face_mprime", "face_mstar with H reading U_Y in place of Y; same P(V), different counterfactuals",
       kFaceMprime, false},
      {"face_m3", "face_mstar with H = or(and(not Y, U_H1), U_H2), P(U_H1=1)=1/4; same P(V)",
       kFaceM3, false},
      {"face_m1_smile", "face_mstar plus smile S = U_S", kFaceM1Smile, false},
      {"face_m2_smile", "face_mstar plus smile S = xor(U_S, Y); same P(V) as face_m1_smile",
       kFaceM2Smile, false},
      {"backdoor", "colored digits: D <-> C confounded, D -> B, C -> B", kBackdoor, true},
      {"frontdoor", "colored digits: D -> C -> B, D <-> B through U_D", kFrontdoor, true},
      {"frontdoor_alt", "frontdoor variant with decreasing color slope and bar on U_D >= 5",
       kFrontdoorAlt, true},
  };
  return models;
}

const BuiltinModel& find_builtin(const std::string& name) {
  const auto& all = builtin_models();
  auto it = std::find_if(all.begin(), all.end(), [&](const auto& m) { return m.name == name; });
  if (it == all.end()) throw ModelError("unknown builtin model '" + name + "'");
  return *it;
}

Scm load_builtin(const std::string& name) { return parse_model(find_builtin(name).source); }

}  // namespace ctf
