namespace curvespan {
}
