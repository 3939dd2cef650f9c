import init, { Demo } from "./pkg/fss_wasm.js";

const WIDTH = 192;
const $ = (id) => document.getElementById(id);
let demo = null;

function draw(id, rgba) {
  const canvas = $(id);
  canvas.width = demo.width();
  canvas.height = demo.layers();
  const img = new ImageData(new Uint8ClampedArray(rgba), canvas.width, canvas.height);
  canvas.getContext("2d").putImageData(img, 0, 0);
}

function run(step) {
  try {
    step();
    $("status").textContent = "";
  } catch (e) {
    $("status").textContent = e.message ?? String(e);
  }
}

function rebuild() {
  run(() => {
    const disparities = $("disparities").value
      .split(",")
      .map((s) => parseFloat(s))
      .filter((d) => Number.isFinite(d));
    demo?.free();
    demo = new Demo(WIDTH, +$("views").value, +$("spacing").value, new Float64Array(disparities), $("textured").checked);
    draw("slice", demo.focal_slice());
    redrawSpectrum();
    redrawAntialiased();
  });
}

function redrawSpectrum() {
  if (demo) run(() => draw("spectrum", demo.spectrum($("lines").checked)));
}

function redrawAntialiased() {
  $("m-value").textContent = $("m").value;
  if (demo) run(() => draw("antialiased", demo.antialiased(+$("m").value)));
}

await init();
for (const id of ["views", "spacing", "disparities", "textured"]) $(id).addEventListener("change", rebuild);
$("lines").addEventListener("change", redrawSpectrum);
$("m").addEventListener("input", redrawAntialiased);
rebuild();
