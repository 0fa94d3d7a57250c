use super::image::GrayImage;

/// Areas of the 8-connected components of the nonzero pixels of `mask`, in
/// raster order of each component's first pixel.
pub fn connected_components(mask: &GrayImage) -> Vec<usize> {
    let (h, w) = (mask.height(), mask.width());
    let on: Vec<bool> = mask.data().iter().map(|v| *v > 0.5).collect();
    let mut seen = vec![false; h * w];
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !on[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            area += 1;
            let (y, x) = ((i / w) as isize, (i % w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (ny, nx) = (y + dy, x + dx);
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if on[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        areas.push(area);
    }
    areas
}
