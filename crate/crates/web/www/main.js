import init, { place_corrections, simulate, adcr_value } from "./pkg/qcad_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(out, f) {
  try {
    out.textContent = f();
  } catch (e) {
    out.textContent = "error: " + e;
  }
}

await init();

$("place").onclick = () => show($("place-out"), () => {
  const r = JSON.parse(place_corrections(num("gates"), num("qubits"), num("rent"), BigInt(num("seed")), num("threshold")));
  $("netlist").value = r.netlist;
  delete r.netlist;
  return JSON.stringify(r, null, 2) + "\n(corrected netlist copied into step 2)";
});

$("simulate").onclick = () => show($("sim-out"), () => {
  const m = JSON.parse(simulate($("netlist").value, $("datapath").value, num("d"), num("es"), BigInt(num("trials")), 1n));
  $("area").value = m.area_mb;
  $("latency").value = m.latency_us;
  $("p").value = m.p_success;
  return JSON.stringify(m, null, 2);
});

$("adcr").onclick = () => show($("adcr-out"), () => {
  const v = adcr_value(num("area"), num("latency"), num("p"));
  return Number.isFinite(v) ? v.toExponential(4) : "infinite (success is zero)";
});
